#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "adalab/problem.hpp"
#include "id_params.hpp"

namespace adalab {

Problem::Problem(std::string id, std::shared_ptr<const Objective> objective, Eigen::VectorXd initial_point,
                 std::optional<double> f_star, std::optional<Smoothness> smoothness)
    : id_(std::move(id)),
      objective_(std::move(objective)),
      initial_point_(std::move(initial_point)),
      f_star_(f_star),
      smoothness_(smoothness) {
  if (!objective_) throw std::invalid_argument("problem needs an objective");
  if (initial_point_.size() != objective_->dim())
    throw std::invalid_argument("initial point has the wrong dimension");
}

const FiniteSumObjective* Problem::finite_sum() const {
  return dynamic_cast<const FiniteSumObjective*>(objective_.get());
}

std::optional<double> Problem::global_L() const {
  if (smoothness_)
    if (const auto* g = std::get_if<GlobalL>(&*smoothness_)) return g->L;
  return std::nullopt;
}

std::optional<Generalized> Problem::generalized() const {
  if (smoothness_)
    if (const auto* g = std::get_if<Generalized>(&*smoothness_)) return *g;
  return std::nullopt;
}

Problem Problem::with_f_star(double f_star) const {
  Problem p = *this;
  p.f_star_ = f_star;
  return p;
}

Problem Problem::with_smoothness(Smoothness s) const {
  Problem p = *this;
  p.smoothness_ = s;
  return p;
}

Problem Problem::with_id(std::string id) const {
  Problem p = *this;
  p.id_ = std::move(id);
  return p;
}

namespace {

class Quadratic final : public Objective {
 public:
  Quadratic(double L, Eigen::VectorXd x_star) : L_(L), x_star_(std::move(x_star)) {}
  Eigen::Index dim() const override { return x_star_.size(); }
  double value(const Eigen::VectorXd& x) const override { return 0.5 * L_ * (x - x_star_).squaredNorm(); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return L_ * (x - x_star_); }

 private:
  double L_;
  Eigen::VectorXd x_star_;
};

class Quartic final : public Objective {
 public:
  explicit Quartic(Eigen::Index d) : d_(d) {}
  Eigen::Index dim() const override { return d_; }
  double value(const Eigen::VectorXd& x) const override { return x.array().square().square().sum(); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return 4.0 * x.array().cube().matrix(); }

 private:
  Eigen::Index d_;
};

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

class RegLogistic final : public FiniteSumObjective {
 public:
  RegLogistic(SparseRows a, double lambda) : a_(std::move(a)), lambda_(lambda) {
    row_norm_max_ = 0.0;
    row_norm_sum_ = 0.0;
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
      const double nrm = a_.row(i).norm();
      row_norm_max_ = std::max(row_norm_max_, nrm);
      row_norm_sum_ += nrm;
    }
  }

  Eigen::Index dim() const override { return a_.cols(); }
  Eigen::Index n() const override { return a_.rows(); }

  double value(const Eigen::VectorXd& x) const override { return value_and_gradient(x).first; }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return value_and_gradient(x).second; }

  std::pair<double, Eigen::VectorXd> value_and_gradient(const Eigen::VectorXd& x) const override {
    const Eigen::VectorXd z = a_ * x;
    double loss = 0.0;
    Eigen::VectorXd w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      loss += softplus(-z(i));
      w(i) = -sigmoid(-z(i));
    }
    const auto nd = static_cast<double>(n());
    const Eigen::ArrayXd x2 = x.array().square();
    Eigen::VectorXd g = a_.transpose() * w;
    g /= nd;
    g += regularizer_gradient(x);
    return {loss / nd + lambda_ * (x2 / (1.0 + x2)).sum(), std::move(g)};
  }

  Eigen::VectorXd batch_gradient(const Eigen::VectorXd& x, std::span<const int> indices) const override {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
    for (const int i : indices) {
      double z = 0.0;
      for (SparseRows::InnerIterator it(a_, i); it; ++it) z += it.value() * x(it.col());
      const double coef = -sigmoid(-z);
      for (SparseRows::InnerIterator it(a_, i); it; ++it) g(it.col()) += coef * it.value();
    }
    g /= static_cast<double>(indices.size());
    g += regularizer_gradient(x);
    return g;
  }

  double deviation_bound() const override { return 2.0 * row_norm_max_; }

  double smoothness_bound() const {
    return row_norm_max_ * row_norm_sum_ / (4.0 * static_cast<double>(n())) + 2.0 * lambda_;
  }

 private:
  Eigen::VectorXd regularizer_gradient(const Eigen::VectorXd& x) const {
    const Eigen::ArrayXd x2 = x.array().square();
    return (lambda_ * 2.0 * x.array() / (1.0 + x2).square()).matrix();
  }

  SparseRows a_;
  double lambda_;
  double row_norm_max_;
  double row_norm_sum_;
};

double grid_value(int exp) { return std::ldexp(1.0, exp); }

}  // namespace

Problem make_quadratic(Eigen::Index d, double L, const Eigen::VectorXd& x_star) {
  if (!(L > 0.0)) throw std::invalid_argument("quadratic needs L > 0");
  if (x_star.size() != d) throw std::invalid_argument("x_star has the wrong dimension");
  std::ostringstream id;
  id << "quadratic:d=" << d << ",L=" << L;
  // A fixed pseudo-random offset: with x_star + 1 the first AdaGrad step (eta sign(g)) lands
  // exactly on x_star whenever eta = 1.
  CounterRng offset(0x51CEu, static_cast<std::uint64_t>(d));
  return Problem(id.str(), std::make_shared<Quadratic>(L, x_star), x_star + offset.normal_vector(d), 0.0,
                 GlobalL{L});
}

bool quartic_certificate_holds(double L0, double L1) {
  if (!(L0 > 0.0 && L1 > 0.0)) return false;
  const double r = 1.0 / L1;
  const double t = (1.0 + std::sqrt(1.0 + 2.0 * L1 * r)) / L1;
  const double worst = std::max(12.0 * r * r, 12.0 * (t + r) * (t + r) - 4.0 * L1 * t * t * t);
  return worst <= L0;
}

Problem make_quartic_gs(Eigen::Index d) {
  if (d < 1) throw std::invalid_argument("quartic needs d >= 1");
  Problem p("quartic:d=" + std::to_string(d), std::make_shared<Quartic>(d), Eigen::VectorXd::Constant(d, 0.5),
            0.0);
  // Sampled fit first, then raised along the grid until the closed-form worst case is covered.
  CounterRng rng(0x5EEDu, static_cast<std::uint64_t>(d));
  const ProbeResult probe = smoothness_probe(p, ProbeBox::cube(d, 2.0), 2000, rng);
  int l1_exp = kProbeGridMinExp;
  int l0_exp = kProbeGridMinExp;
  if (probe.grid_fit) {
    l1_exp = static_cast<int>(std::lround(std::log2(probe.grid_fit->L1)));
    l0_exp = static_cast<int>(std::lround(std::log2(probe.grid_fit->L0)));
  }
  while (!quartic_certificate_holds(grid_value(l0_exp), grid_value(l1_exp))) {
    if (l0_exp < kProbeGridMaxExp) {
      ++l0_exp;
    } else {
      ++l1_exp;
      l0_exp = kProbeGridMinExp;
      if (l1_exp > kProbeGridMaxExp) throw std::logic_error("no certified (L0, L1) on the grid");
    }
  }
  return p.with_smoothness(Generalized{grid_value(l0_exp), grid_value(l1_exp)});
}

Problem make_reg_logistic(const Dataset& data, double lambda, bool fold_labels) {
  if (data.empty()) throw std::invalid_argument("logistic regression needs a nonempty dataset");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  SparseRows a = data.rows;
  if (fold_labels) a = data.labels.asDiagonal() * a;
  auto obj = std::make_shared<RegLogistic>(std::move(a), lambda);
  const double L = obj->smoothness_bound();
  std::ostringstream id;
  id << "reglog:n=" << data.n() << ",d=" << data.d() << ",lambda=" << lambda << (fold_labels ? "" : ",literal=1");
  return Problem(id.str(), obj, Eigen::VectorXd::Zero(data.d()), std::nullopt, GlobalL{L});
}

double estimate_f_star(const Problem& problem, std::size_t steps, double eta, double margin) {
  Eigen::VectorXd x = problem.initial_point();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  double best = problem.value(x);
  for (std::size_t s = 0; s < steps; ++s) {
    auto [f, g] = problem.value_and_gradient(x);
    if (!std::isfinite(f) || !g.allFinite()) break;
    best = std::min(best, f);
    v += g.cwiseAbs2();
    x -= eta * g.cwiseQuotient((v.cwiseSqrt().array() + 1e-8).matrix());
  }
  const double f_last = problem.value(x);
  if (std::isfinite(f_last)) best = std::min(best, f_last);
  return best - margin;
}

ProbeBox ProbeBox::cube(Eigen::Index d, double half_width) {
  return {Eigen::VectorXd::Constant(d, -half_width), Eigen::VectorXd::Constant(d, half_width)};
}

ProbeResult smoothness_probe(const Problem& problem, const ProbeBox& box, std::size_t n_pairs, CounterRng& rng) {
  if (n_pairs < 100) throw std::invalid_argument("smoothness probe needs at least 100 pairs");
  const Eigen::Index d = problem.dim();
  if (box.lower.size() != d || box.upper.size() != d || !(box.upper.array() >= box.lower.array()).all())
    throw std::invalid_argument("probe box does not match the problem");

  ProbeResult result;
  for (int l1_exp = kProbeGridMinExp; l1_exp <= kProbeGridMaxExp; ++l1_exp) {
    const double L1 = grid_value(l1_exp);
    const double radius = 1.0 / L1;
    double required_L0 = 0.0;
    double max_ratio = 0.0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
      Eigen::VectorXd x(d);
      for (Eigen::Index j = 0; j < d; ++j) x(j) = box.lower(j) + (box.upper(j) - box.lower(j)) * rng.uniform();
      Eigen::VectorXd u = rng.normal_vector(d);
      u.normalize();
      const double r = radius * (1.0 - rng.uniform());  // (0, radius]
      const Eigen::VectorXd y = x + r * u;
      const Eigen::VectorXd gx = problem.gradient(x);
      const double dist = (y - x).norm();
      if (!(dist > 0.0)) continue;
      const double ratio = (problem.gradient(y) - gx).norm() / dist;
      max_ratio = std::max(max_ratio, ratio);
      required_L0 = std::max(required_L0, ratio - L1 * gx.norm());
    }
    if (l1_exp == kProbeGridMinExp) result.max_ratio = max_ratio;
    int l0_exp = kProbeGridMinExp;
    while (l0_exp <= kProbeGridMaxExp && grid_value(l0_exp) < required_L0) ++l0_exp;
    if (l0_exp <= kProbeGridMaxExp) {
      result.grid_fit = Generalized{grid_value(l0_exp), L1};
      break;
    }
  }

  if (!result.grid_fit) {
    result.exceeds_grid = true;
    return result;
  }
  if (result.max_ratio == 0.0) {
    result.estimate = *result.grid_fit;
  } else if (result.grid_fit->L1 == grid_value(kProbeGridMinExp)) {
    result.estimate = GlobalL{result.max_ratio};
  } else {
    result.estimate = *result.grid_fit;
  }
  return result;
}

Problem make_problem(const std::string& id, const std::string& data_path) {
  detail::IdParams params(id);
  const std::string& family = params.family();
  if (family == "quadratic") {
    const auto d = static_cast<Eigen::Index>(params.number("d", 10));
    const double L = params.number("L", 1.0);
    params.finish();
    return make_quadratic(d, L, Eigen::VectorXd::Zero(d));
  }
  if (family == "quartic") {
    const auto d = static_cast<Eigen::Index>(params.number("d", 4));
    params.finish();
    return make_quartic_gs(d);
  }
  if (family == "a9a-reglog") {
    const double lambda = params.number("lambda", 0.1);
    const auto subsample = static_cast<Eigen::Index>(params.number("subsample", 0));
    const bool literal = params.number("literal", 0) != 0.0;
    params.finish();
    Dataset data = load_libsvm(data_path);
    if (subsample > 0) data = data.head(subsample);
    return make_reg_logistic(data, lambda, !literal).with_id(id);
  }
  throw std::invalid_argument("unknown problem family '" + family + "'");
}

}  // namespace adalab
