#include "adalab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "adalab/lp.hpp"
#include "id_params.hpp"

namespace adalab {

void NoiseSpec::validate() const {
  if (!(A >= 0.0 && B >= 0.0 && C >= 0.0) || !std::isfinite(A + B + C))
    throw std::invalid_argument("noise spec needs finite A, B, C >= 0");
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Eigen::VectorXd a3_draw(const Eigen::VectorXd& grad, double envelope, CounterRng& rng) {
  const Eigen::Index d = grad.size();
  const double sigma = std::sqrt(std::max(0.0, envelope));
  const double r = rng.uniform();
  Eigen::VectorXd e(d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < d; ++i) e(i) = (rng() >> 63) ? scale : -scale;
  return grad + (sigma * r) * e;
}

}  // namespace

MinibatchDraw minibatch_draw(const FiniteSumObjective& objective, const Eigen::VectorXd& x, Eigen::Index batch_size,
                             CounterRng& rng) {
  const Eigen::Index n = objective.n();
  if (batch_size < 1 || batch_size > n) throw std::invalid_argument("batch size must lie in [1, n]");
  MinibatchDraw out;
  if (batch_size == n) {
    out.indices.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out.indices[static_cast<std::size_t>(i)] = static_cast<int>(i);
  } else {
    // Floyd's sampling: exactly batch_size draws, no rejection loop.
    std::unordered_set<int> chosen;
    chosen.reserve(static_cast<std::size_t>(batch_size) * 2);
    for (Eigen::Index j = n - batch_size; j < n; ++j) {
      std::uniform_int_distribution<Eigen::Index> pick(0, j);
      const int t = static_cast<int>(pick(rng));
      if (!chosen.insert(t).second) chosen.insert(static_cast<int>(j));
    }
    out.indices.assign(chosen.begin(), chosen.end());
    std::sort(out.indices.begin(), out.indices.end());
  }
  out.g = objective.batch_gradient(x, out.indices);
  return out;
}

Eigen::VectorXd synthetic_a3_draw(const Problem& problem, const NoiseSpec& spec, const Eigen::VectorXd& x,
                                  CounterRng& rng) {
  return SyntheticA3Oracle(spec).draw(problem, x, problem.gradient(x), rng);
}

Eigen::VectorXd gaussian_draw(const Problem& problem, double sigma2, const Eigen::VectorXd& x, CounterRng& rng) {
  return GaussianOracle(sigma2).draw(problem, x, problem.gradient(x), rng);
}

MinibatchOracle::MinibatchOracle(Eigen::Index batch_size) : batch_size_(batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
}

std::string MinibatchOracle::id() const { return "minibatch:batch=" + std::to_string(batch_size_); }

Eigen::VectorXd MinibatchOracle::draw(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd&,
                                      CounterRng& rng) const {
  const FiniteSumObjective* fs = problem.finite_sum();
  if (!fs) throw std::invalid_argument("minibatch oracle needs a finite-sum problem");
  return minibatch_draw(*fs, x, batch_size_, rng).g;
}

std::optional<NoiseSpec> MinibatchOracle::certified_spec(const Problem& problem) const {
  const FiniteSumObjective* fs = problem.finite_sum();
  if (!fs) return std::nullopt;
  const double r = fs->deviation_bound();
  return NoiseSpec{0.0, 0.0, r * r};
}

SyntheticA3Oracle::SyntheticA3Oracle(NoiseSpec spec) : spec_(spec) { spec_.validate(); }

std::string SyntheticA3Oracle::id() const {
  return "synthetic-a3:A=" + format_number(spec_.A) + ",B=" + format_number(spec_.B) + ",C=" + format_number(spec_.C);
}

Eigen::VectorXd SyntheticA3Oracle::draw(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                                        CounterRng& rng) const {
  if (!problem.f_star()) throw std::invalid_argument("synthetic (A3) noise needs f*");
  const double gap = std::max(0.0, problem.value(x) - *problem.f_star());
  return a3_draw(grad, spec_.envelope(gap, grad.squaredNorm()), rng);
}

GaussianOracle::GaussianOracle(double sigma2) : sigma2_(sigma2) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("sigma2 must be >= 0");
}

std::string GaussianOracle::id() const { return "gaussian:sigma2=" + format_number(sigma2_); }

Eigen::VectorXd GaussianOracle::draw(const Problem&, const Eigen::VectorXd&, const Eigen::VectorXd& grad,
                                     CounterRng& rng) const {
  const double sd = std::sqrt(sigma2_ / static_cast<double>(grad.size()));
  return grad + sd * rng.normal_vector(grad.size());
}

std::shared_ptr<const Oracle> make_oracle(const std::string& id) {
  detail::IdParams params(id);
  const std::string& family = params.family();
  std::shared_ptr<const Oracle> out;
  if (family == "noiseless") {
    out = std::make_shared<NoiselessOracle>();
  } else if (family == "minibatch") {
    out = std::make_shared<MinibatchOracle>(static_cast<Eigen::Index>(params.number("batch", 256)));
  } else if (family == "synthetic-a3") {
    out = std::make_shared<SyntheticA3Oracle>(
        NoiseSpec{params.number("A", 0.0), params.number("B", 0.0), params.number("C", 0.0)});
  } else if (family == "gaussian") {
    out = std::make_shared<GaussianOracle>(params.number("sigma2", 1.0));
  } else {
    throw std::invalid_argument("unknown oracle family '" + family + "'");
  }
  params.finish();
  return out;
}

Eigen::Vector3d default_fit_weights(const std::vector<NoiseSample>& samples) {
  Eigen::Vector3d w(0.0, 0.0, 1.0);
  for (const auto& s : samples) {
    w(0) += s.u;
    w(1) += s.v;
  }
  if (!samples.empty()) w.head<2>() /= static_cast<double>(samples.size());
  for (int j = 0; j < 2; ++j)
    if (!(w(j) > 0.0)) w(j) = 1.0;
  return w;
}

NoiseFit estimate_noise_params(const std::vector<NoiseSample>& samples, const std::optional<Eigen::Vector3d>& weights) {
  if (samples.empty()) throw std::invalid_argument("noise fit needs at least one sample");
  const Eigen::Vector3d w = weights ? *weights : default_fit_weights(samples);
  if (!(w.array() > 0.0).all() || !w.allFinite()) throw std::invalid_argument("fit weights must be positive");

  const auto m = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd A(m, 3);
  Eigen::VectorXd b(m);
  double n_max = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (!(s.u >= 0.0 && s.v >= 0.0 && s.n >= 0.0)) throw std::invalid_argument("noise samples must be nonnegative");
    A.row(i) << s.u, s.v, 1.0;
    b(i) = s.n;
    n_max = std::max(n_max, s.n);
  }

  NoiseFit fit;
  fit.n_samples = samples.size();
  if (n_max > 0.0) {
    // (0, 0, n_max) is feasible, so no optimum spends more than w_C n_max on any one term.
    const double budget = w(2) * n_max;
    const Eigen::Vector3d upper(2.0 * budget / w(0), 2.0 * budget / w(1), 2.0 * n_max);
    CounterRng rng(0x4C50u);
    const LpResult r = solve_lp(A, b, {w, Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitX()},
                                Eigen::Vector3d::Zero(), upper, rng);
    if (!r.feasible) throw std::logic_error("noise fit LP reported infeasible");
    fit.spec = NoiseSpec{std::max(0.0, r.x(0)), std::max(0.0, r.x(1)), std::max(0.0, r.x(2))};
  }
  const Eigen::Vector3d p(fit.spec.A, fit.spec.B, fit.spec.C);
  const Eigen::VectorXd slack = A * p - b;
  fit.max_slack = slack.maxCoeff();
  fit.min_slack = slack.minCoeff();
  fit.cost = w.dot(p);
  return fit;
}

std::vector<NoiseSample> collect_noise_samples(const Problem& problem, const Oracle& oracle, const HyperParams& hyper,
                                               std::size_t steps, CounterRng& rng) {
  if (!problem.f_star()) throw std::invalid_argument("collecting noise samples needs f*; run the f* estimation first");
  hyper.validate();
  HyperParams plain = hyper;
  plain.beta = 0.0;
  auto state = OptimizerState<double>::initial(problem.initial_point());
  std::vector<NoiseSample> out;
  out.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto [f, grad] = problem.value_and_gradient(state.x);
    const Eigen::VectorXd g = oracle.draw(problem, state.x, grad, rng);
    if (!std::isfinite(f) || !g.allFinite()) break;
    out.push_back({std::max(0.0, f - *problem.f_star()), grad.squaredNorm(), (g - grad).squaredNorm()});
    state = adagrad_momentum_step(state, g, plain);
  }
  return out;
}

double verify_a3(const Oracle& oracle, const Problem& problem, const NoiseSpec& spec,
                 const std::vector<Eigen::VectorXd>& probe_points, std::size_t trials_per_point, CounterRng& rng) {
  spec.validate();
  if (spec.A != 0.0 && !problem.f_star()) throw std::invalid_argument("checking (A3) with A > 0 needs f*");
  double worst = 0.0;
  for (const auto& x : probe_points) {
    const Eigen::VectorXd grad = problem.gradient(x);
    const double gap = spec.A != 0.0 ? std::max(0.0, problem.value(x) - *problem.f_star()) : 0.0;
    const double env = spec.envelope(gap, grad.squaredNorm());
    for (std::size_t t = 0; t < trials_per_point; ++t) {
      const double noise = (oracle.draw(problem, x, grad, rng) - grad).squaredNorm();
      if (noise == 0.0) continue;
      if (env <= 0.0) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, noise / env);
    }
  }
  return worst;
}

}  // namespace adalab
