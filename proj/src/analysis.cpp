#include "adalab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace adalab {

double relative_slack(double lhs, double rhs) {
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  if (scale == 0.0) return 0.0;
  if (!std::isfinite(scale)) return (std::isinf(rhs) && rhs > 0.0 && std::isfinite(lhs)) ? 1.0 : -1.0;
  return (rhs - lhs) / scale;
}

NoiseBudget compute_noise_budget(const NoiseSpec& spec, double L, const std::vector<double>& delta_x, double Delta,
                                 std::size_t T, double delta, BudgetMode mode) {
  spec.validate();
  if (!(L > 0.0)) throw std::invalid_argument("noise budget needs L > 0");
  NoiseBudget out;
  out.mode = mode;
  out.X = 2.0 * spec.A + 4.0 * L * spec.B + 4.0 * L;
  const double factor =
      mode == BudgetMode::Subgaussian ? std::sqrt(std::log(std::exp(1.0) * static_cast<double>(T) / delta)) : 1.0;
  out.G_s.reserve(delta_x.size());
  for (const double dx : delta_x) {
    if (dx < 0.0) throw std::invalid_argument("function value gaps must be nonnegative");
    out.G_s.push_back(factor * std::sqrt(out.X * dx + 2.0 * spec.C));
  }
  out.G = factor * std::sqrt(out.X * Delta + 2.0 * spec.C);
  return out;
}

Eigen::VectorXd proxy_stepsize(const Eigen::VectorXd& v_prev, double G_s, double epsilon) {
  return ((v_prev.array() + G_s * G_s).sqrt() + epsilon).matrix();
}

std::string to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "fail";
    case CheckStatus::NotApplicable:
      return "not-applicable";
  }
  return "unknown";
}

CheckEntry CheckEntry::not_applicable(std::string name, std::string why) {
  CheckEntry e(std::move(name));
  e.note = std::move(why);
  return e;
}

void CheckEntry::record(double slack, long step) {
  if (evaluated == 0 || slack < worst_slack || std::isnan(slack)) {
    worst_slack = slack;
    worst_step = step;
  }
  ++evaluated;
  if (!(slack >= -kSlackTolerance)) {
    status = CheckStatus::Fail;
  } else if (status == CheckStatus::NotApplicable) {
    status = CheckStatus::Pass;
  }
}

CheckEntry check_proxy_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double G_s, const Eigen::VectorXd& g,
                           long step) {
  CheckEntry e("proxy_gap");
  if (a.size() != b.size() || a.size() != g.size()) throw std::invalid_argument("proxy gap inputs disagree in size");
  if (!(b.array() > 0.0).all()) throw std::invalid_argument("b must be positive (needs epsilon > 0)");
  if (g.norm() > G_s) {
    ++e.precondition_violations;
    e.note = "||g_s|| > G_s";
    return e;
  }
  for (Eigen::Index i = 0; i < a.size(); ++i)
    e.record_inequality(std::abs(1.0 / a(i) - 1.0 / b(i)), G_s / (a(i) * b(i)), step);
  return e;
}

double check_logsum(const std::vector<double>& alpha, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("log-sum needs eps > 0");
  double partial = 0.0;
  double lhs = 0.0;
  for (const double a : alpha) {
    if (a < 0.0) throw std::invalid_argument("log-sum needs a nonnegative sequence");
    partial += a;
    lhs += a / (eps + partial);
  }
  return std::log1p(partial / eps) - lhs;
}

CheckEntry check_smooth_grad_bound(const Problem& problem, const std::vector<Eigen::VectorXd>& points) {
  const char* name = "smooth_grad_bound";
  if (!problem.f_star()) return CheckEntry::not_applicable(name, "f* unknown");
  if (!problem.smoothness()) return CheckEntry::not_applicable(name, "no smoothness metadata");
  const double f_star = *problem.f_star();
  CheckEntry e(name);
  long k = 0;
  for (const auto& x : points) {
    const double gap = problem.value(x) - f_star;
    const Eigen::VectorXd grad = problem.gradient(x);
    if (const auto L = problem.global_L()) {
      e.record_inequality(grad.squaredNorm(), 2.0 * *L * gap, k);
    } else {
      const Generalized gs = *problem.generalized();
      const double g = std::max(0.0, gap);
      e.record_inequality(grad.norm(), std::max(4.0 * gs.L1 * g, std::sqrt(4.0 * gs.L0 * g)), k);
    }
    ++k;
  }
  return e;
}

std::vector<CheckEntry> check_gap_xs_ys(const TrajectoryRecord& traj, const YSequence& y, std::optional<double> L1) {
  const double beta = effective_beta(traj.method, traj.hyper);
  const double eta = traj.hyper.eta;
  const double sqrt_d = std::sqrt(static_cast<double>(traj.dim()));
  const double cap = eta * sqrt_d / ((1.0 - beta) * (1.0 - beta));
  const bool local = L1 && eta <= (1.0 - beta) * (1.0 - beta) / (*L1 * sqrt_d);

  CheckEntry gap("gap_xs_ys");
  CheckEntry gap_cap = CheckEntry::not_applicable(
      "gap_xs_ys_cap", L1 ? "eta above (1-beta)^2/(L1 sqrt(d))" : "no L1 for this problem");
  if (local) gap_cap.note.clear();
  const auto T = static_cast<Eigen::Index>(traj.steps);
  for (Eigen::Index s = 0; s < T; ++s) {
    const double worst = std::max({(traj.x.col(s + 1) - traj.x.col(s)).norm(), (y.y.col(s) - traj.x.col(s)).norm(),
                                   (y.y.col(s + 1) - y.y.col(s)).norm()});
    gap.record_inequality(worst, cap, s + 1);
    if (local) gap_cap.record_inequality(worst, 1.0 / *L1, s + 1);
  }
  return {gap, gap_cap};
}

InitialInfo initial_info(const Problem& problem, const Eigen::VectorXd& x1) {
  if (!problem.f_star()) throw std::invalid_argument("the bounds need f*");
  return {std::max(0.0, problem.value(x1) - *problem.f_star()), problem.gradient(x1).norm(), problem.dim()};
}

double poly_F(const InitialInfo& init, const NoiseSpec& spec, double L, const HyperParams& hyper, double t) {
  const double X = 2.0 * spec.A + 4.0 * L * spec.B + 4.0 * L;
  const double omb = 1.0 - hyper.beta;
  const double d = static_cast<double>(init.d);
  const double eta = hyper.eta;
  const double inner = (init.delta_x1 * X + 2.0 * spec.C) * t +
                       (eta * init.grad_norm * std::sqrt(d) / omb + L * eta * eta * d / (2.0 * omb * omb)) * X * t * t +
                       L * eta * eta * d * X * t * t * t / (omb * omb);
  return 1.0 + inner / (hyper.epsilon * hyper.epsilon);
}

TheoremBound compute_theorem1_bound(const InitialInfo& init, const NoiseSpec& spec, double L, const HyperParams& hyper,
                                    std::size_t T, double delta, BudgetMode mode) {
  spec.validate();
  hyper.validate();
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (T < 1) throw std::invalid_argument("T must be at least 1");

  TheoremBound out;
  out.T = T;
  out.delta = delta;
  const double omb = 1.0 - hyper.beta;
  const double eta = hyper.eta;
  const double d = static_cast<double>(init.d);
  const double Td = static_cast<double>(T);
  out.X = 2.0 * spec.A + 4.0 * L * spec.B + 4.0 * L;
  out.F_T = poly_F(init, spec, L, hyper, Td);
  out.L_tilde = L * eta * eta / (2.0 * omb * omb * omb) + L * eta * eta / (2.0 * omb * omb);

  const double log_td = std::log(Td / delta);
  const double log_f = std::log(out.F_T);
  const double s2c = std::sqrt(2.0 * spec.C);
  out.Delta = 4.0 * init.delta_x1 + 12.0 * s2c * eta / omb * log_td +
              4.0 * (s2c * eta / omb + eta * eta * L / (omb * omb * omb) + out.L_tilde) * d * log_f +
              72.0 * out.X * eta * eta / (omb * omb) * log_td * log_td +
              8.0 * out.X * eta * eta / (omb * omb) * d * d * log_f * log_f;

  const double factor = mode == BudgetMode::Subgaussian ? std::sqrt(std::log(std::exp(1.0) * Td / delta)) : 1.0;
  out.G = factor * std::sqrt(out.X * out.Delta + 2.0 * spec.C);
  out.Delta1 = out.Delta * omb / eta;
  out.B1 = spec.B + 1.0;
  out.rhs = 2.0 * out.Delta1 *
            ((out.Delta1 * out.B1 + out.G + hyper.epsilon) / Td + std::sqrt(2.0 * (spec.A * out.Delta + spec.C) / Td));
  return out;
}

double gen_H(const NoiseSpec& spec, double L0, double L1, double gap) {
  const double r = 4.0 * L1 * gap + std::sqrt(4.0 * L0 * gap);
  return std::sqrt(2.0 * spec.A * gap + 2.0 * (spec.B + 1.0) * r * r + 2.0 * spec.C);
}

double gen_L(double L0, double L1, double gap) {
  return 2.0 * L0 + 2.0 * L1 * (4.0 * L1 * gap + std::sqrt(4.0 * L0 * gap));
}

GenSmoothBound compute_theorem2_bound(const InitialInfo& init, const NoiseSpec& spec, double L0, double L1,
                                      const HyperParams& hyper, double C0, std::size_t T, double delta) {
  spec.validate();
  hyper.validate();
  if (!(L0 > 0.0 && L1 > 0.0 && C0 > 0.0)) throw std::invalid_argument("L0, L1 and C0 must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (T < 1) throw std::invalid_argument("T must be at least 1");

  GenSmoothBound out;
  out.T = T;
  out.delta = delta;
  out.C0 = C0;
  const double omb = 1.0 - hyper.beta;
  const double d = static_cast<double>(init.d);
  const double sd = std::sqrt(d);
  const double Td = static_cast<double>(T);
  const double eps2 = hyper.epsilon * hyper.epsilon;

  const double growth = init.grad_norm + C0 * sd * Td / omb;
  out.I_T = init.delta_x1 * Td + C0 * sd / omb * growth * Td * Td + C0 * C0 * d / (2.0 * omb * omb) * Td * Td;
  out.J_T = 1.0 + (2.0 * spec.A * out.I_T + 2.0 * (spec.B + 1.0) * growth * growth * Td + 2.0 * spec.C * Td) / eps2;
  const double log_j = std::log(out.J_T);
  const double c2d = C0 * C0 * d;

  out.Lambda_y = init.delta_x1 + 3.0 * C0 / omb * std::log(Td / delta) + C0 * d / omb * log_j +
                 c2d / (2.0 * omb * omb * omb) * log_j +
                 (c2d / (2.0 * omb * omb * omb) + c2d / (2.0 * omb * omb)) * log_j;
  out.Lambda_x = (2.0 * L0 + 1.0) * out.Lambda_y + 8.0 * L1 * out.Lambda_y * out.Lambda_y + c2d / (omb * omb) * log_j;
  out.H = gen_H(spec, L0, L1, out.Lambda_x);
  out.L = gen_L(L0, L1, out.Lambda_x);
  out.eta_max = std::min({C0, C0 / out.H, C0 / out.L, omb * omb / (L1 * sd)});
  out.eta_ok = hyper.eta <= out.eta_max;
  out.Lambda_y_tilde = 2.0 * out.Lambda_y * omb / hyper.eta;
  out.rhs = 2.0 * out.Lambda_y_tilde *
            ((out.Lambda_y_tilde * (spec.B + 1.0) + out.H + hyper.epsilon) / Td +
             std::sqrt(2.0 * (spec.A * out.Lambda_x + spec.C) / Td));
  return out;
}

bool InvariantReport::passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.failed(); });
}

const CheckEntry* InvariantReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

const std::vector<std::string>& invariant_check_names() {
  static const std::vector<std::string> names = {
      "y_identity",  "v_monotone",   "momentum_bound", "gap_xs_ys",       "gap_xs_ys_cap", "log_sum",
      "gradient_growth", "delta_rough", "sum_gb",    "momentum_sq", "momentum_sum_sq", "delta_y_x", "proxy_gap"};
  return names;
}

namespace {

struct RunView {
  const TrajectoryRecord& traj;
  Eigen::Index T;
  Eigen::Index d;
  double beta;
  double eta;
  double eps;
  double omb;
};

// Per-coordinate log-sum with alpha = g^2 and eps -> eps^2, at every prefix.
CheckEntry log_sum_entry(const RunView& r) {
  CheckEntry e("log_sum");
  const double eps2 = r.eps * r.eps;
  for (Eigen::Index i = 0; i < r.traj.g.rows(); ++i) {
    double partial = 0.0;
    double lhs = 0.0;
    for (Eigen::Index s = 0; s < r.T; ++s) {
      const double a = r.traj.g(i, s) * r.traj.g(i, s);
      partial += a;
      lhs += a / (eps2 + partial);
      e.record_inequality(lhs, std::log1p(partial / eps2), s + 1);
    }
  }
  return e;
}

}  // namespace

InvariantReport check_trajectory_invariants(const TrajectoryRecord& traj, const Problem& problem,
                                            const std::optional<NoiseSpec>& spec, const CheckOptions& options) {
  InvariantReport report;
  auto& out = report.entries;
  if (traj.method == Method::Sgd || traj.method == Method::AdagradNorm) {
    for (const auto& name : invariant_check_names())
      out.push_back(CheckEntry::not_applicable(name, "checks cover coordinate-wise AdaGrad (with momentum)"));
    return report;
  }
  if (traj.dim() != problem.dim()) throw std::invalid_argument("trajectory and problem dimensions differ");

  const double beta = effective_beta(traj.method, traj.hyper);
  HyperParams hyper = traj.hyper;  // bounds use the momentum the method actually applied
  hyper.beta = beta;
  const RunView r{traj,          static_cast<Eigen::Index>(traj.steps), traj.dim(), beta, traj.hyper.eta,
                  traj.hyper.epsilon, 1.0 - beta};
  const double d = static_cast<double>(r.d);
  const double sd = std::sqrt(d);
  const Eigen::Index T = r.T;
  const Eigen::Index points = T + 1;  // x_1 .. x_{T+1}

  // y-sequence identity.
  const YSequence y = compute_y_sequence(traj);
  {
    CheckEntry e("y_identity");
    e.record(kYResidualTolerance - y.max_residual, -1);
    if (y.max_residual > kYResidualTolerance) e.status = CheckStatus::Fail;
    std::ostringstream note;
    note << "max residual " << y.max_residual;
    e.note = note.str();
    out.push_back(e);
  }

  {
    CheckEntry e("v_monotone");
    for (Eigen::Index s = 1; s < T; ++s)
      for (Eigen::Index i = 0; i < traj.v.rows(); ++i) e.record_inequality(traj.v(i, s - 1), traj.v(i, s), s + 1);
    out.push_back(e);
  }

  {
    CheckEntry e("momentum_bound");
    const double cap = r.eta * sd / r.omb;
    for (Eigen::Index s = 0; s < T; ++s) e.record_inequality(traj.m.col(s).norm(), cap, s + 1);
    out.push_back(e);
  }

  const std::optional<Generalized> gen = problem.generalized();
  const std::optional<double> L = problem.global_L();
  {
    auto gaps = check_gap_xs_ys(traj, y, gen ? std::optional<double>(gen->L1) : std::nullopt);
    out.insert(out.end(), gaps.begin(), gaps.end());
  }
  out.push_back(log_sum_entry(r));

  // Quantities below need f*.
  const std::vector<std::string> gap_dependent = {"gradient_growth", "delta_rough", "sum_gb",   "momentum_sq",
                                                  "momentum_sum_sq", "delta_y_x",   "proxy_gap"};
  auto skip_rest = [&](const std::string& why) {
    for (const auto& name : gap_dependent) out.push_back(CheckEntry::not_applicable(name, why));
  };
  if (!problem.f_star()) {
    skip_rest("f* unknown");
    return report;
  }
  if (!L && !gen) {
    skip_rest("no smoothness metadata");
    return report;
  }
  const bool local_ok = gen && r.eta <= r.omb * r.omb / (gen->L1 * sd);
  if (gen && !local_ok) {
    skip_rest("eta above (1-beta)^2/(L1 sqrt(d)); the generalized lemmas do not apply");
    return report;
  }

  const double f_star = *problem.f_star();
  std::vector<double> delta_x(static_cast<std::size_t>(points));
  for (Eigen::Index s = 0; s < points; ++s) delta_x[static_cast<std::size_t>(s)] = std::max(0.0, traj.f(s) - f_star);
  const double g1 = traj.grad.col(0).norm();
  const InitialInfo init{delta_x[0], g1, r.d};

  std::vector<double> gb(static_cast<std::size_t>(T));
  std::vector<double> m_sq(static_cast<std::size_t>(T));
  for (Eigen::Index s = 0; s < T; ++s) {
    gb[static_cast<std::size_t>(s)] = traj.g.col(s).cwiseQuotient(traj.b.col(s)).squaredNorm();
    m_sq[static_cast<std::size_t>(s)] = traj.m.col(s).squaredNorm();
  }
  const double c = r.eta * sd / r.omb;

  // L_s along the run (generalized case), 1-based s -> index s-1.
  std::vector<double> Ls;
  if (gen) {
    Ls.reserve(delta_x.size());
    for (const double dx : delta_x) Ls.push_back(gen_L(gen->L0, gen->L1, dx));
  }

  {
    CheckEntry e("gradient_growth");
    double cum_L = 0.0;
    for (Eigen::Index s = 0; s < points; ++s) {
      double rhs;
      if (L) {
        rhs = g1 + *L * r.eta * static_cast<double>(s + 1) * sd / r.omb;
      } else {
        cum_L += Ls[static_cast<std::size_t>(s)];
        rhs = g1 + c * cum_L;
      }
      e.record_inequality(traj.grad.col(s).norm(), rhs, s + 1);
    }
    out.push_back(e);
  }

  // I_n for the generalized case (actual L_j) and the growth terms q_s.
  std::vector<double> I_n(static_cast<std::size_t>(points));
  std::vector<double> q_sq_cum(static_cast<std::size_t>(points));
  if (gen) {
    double cum_L = 0.0, Q = 0.0, sumQ = 0.0, sum_cumL = 0.0, q_sq = 0.0;
    for (Eigen::Index t = 0; t < points; ++t) {
      cum_L += Ls[static_cast<std::size_t>(t)];
      const double q = g1 + c * cum_L;
      Q += q;
      sumQ += Q;
      sum_cumL += cum_L;
      q_sq += q * q;
      const double n = static_cast<double>(t + 1);
      I_n[static_cast<std::size_t>(t)] =
          delta_x[0] * n + c * sumQ + r.eta * r.eta * d / (2.0 * r.omb * r.omb) * sum_cumL;
      q_sq_cum[static_cast<std::size_t>(t)] = q_sq;
    }
  }

  {
    CheckEntry e("delta_rough");
    double sum = 0.0;
    for (Eigen::Index t = 0; t < points; ++t) {
      sum += delta_x[static_cast<std::size_t>(t)];
      const double n = static_cast<double>(t + 1);
      double rhs;
      if (L) {
        rhs = delta_x[0] * n +
              (r.eta * g1 * sd / r.omb + *L * r.eta * r.eta * d / (2.0 * r.omb * r.omb)) * n * n +
              *L * r.eta * r.eta * d * n * n * n / (r.omb * r.omb);
      } else {
        rhs = I_n[static_cast<std::size_t>(t)];
      }
      e.record_inequality(sum, rhs, t + 1);
    }
    out.push_back(e);
  }

  // sum_1 family: needs the envelope.
  if (!spec) {
    for (const char* name : {"sum_gb", "momentum_sq", "momentum_sum_sq"})
      out.push_back(CheckEntry::not_applicable(name, "no certified noise envelope"));
  } else {
    CheckEntry e_gb("sum_gb"), e_m("momentum_sq"), e_ms("momentum_sum_sq");
    const double log_FT = L ? std::log(poly_F(init, *spec, *L, hyper, static_cast<double>(traj.hyper.horizon)))
                            : 0.0;
    const double eps2 = r.eps * r.eps;
    double sum_gb = 0.0, sum_m = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      double log_bound = log_FT;
      if (gen) {
        const double tt = static_cast<double>(t + 1);
        const double J = 1.0 + (2.0 * spec->A * I_n[static_cast<std::size_t>(t)] +
                                2.0 * (spec->B + 1.0) * q_sq_cum[static_cast<std::size_t>(t)] + 2.0 * spec->C * tt) /
                                   eps2;
        log_bound = std::log(J);
      }
      sum_gb += gb[static_cast<std::size_t>(t)];
      sum_m += m_sq[static_cast<std::size_t>(t)];
      e_gb.record_inequality(sum_gb, d * log_bound, t + 1);
      e_m.record_inequality(m_sq[static_cast<std::size_t>(t)], r.eta * r.eta * d / r.omb * log_bound, t + 1);
      e_ms.record_inequality(sum_m, r.eta * r.eta * d / (r.omb * r.omb) * log_bound, t + 1);
    }
    out.push_back(e_gb);
    out.push_back(e_m);
    out.push_back(e_ms);
  }

  {
    CheckEntry e("delta_y_x");
    for (Eigen::Index s = 0; s < points; ++s) {
      const double dy = std::max(0.0, problem.value(y.y.col(s)) - f_star);
      const double dx = delta_x[static_cast<std::size_t>(s)];
      const double mprev = s == 0 ? 0.0 : m_sq[static_cast<std::size_t>(s - 1)];
      if (L) {
        e.record_inequality(dx / 2.0 - *L * mprev / (2.0 * r.omb * r.omb), dy, s + 1);
      } else {
        const double rhs = (2.0 * gen->L0 + 1.0) * dy + 8.0 * gen->L1 * dy * dy +
                           (Ls[static_cast<std::size_t>(s)] + 1.0) / (2.0 * r.omb * r.omb) * mprev;
        e.record_inequality(dx, rhs, s + 1);
      }
    }
    out.push_back(e);
  }

  // Proxy gap and the high-probability events.
  const bool complete = traj.complete();
  std::optional<NoiseBudget> budget;
  if (spec && L && complete) {
    report.bound1 = compute_theorem1_bound(init, *spec, *L, hyper, hyper.horizon, options.delta, options.mode);
    budget = compute_noise_budget(*spec, *L, delta_x, report.bound1->Delta, traj.hyper.horizon, options.delta,
                                  options.mode);
  } else if (spec && L) {
    budget = compute_noise_budget(*spec, *L, delta_x, 0.0, std::max<std::size_t>(traj.steps, 1), options.delta,
                                  options.mode);
  }
  if (spec && gen && complete)
    report.bound2 = compute_theorem2_bound(init, *spec, gen->L0, gen->L1, hyper, options.C0, traj.hyper.horizon,
                                           options.delta);

  if (!spec) {
    out.push_back(CheckEntry::not_applicable("proxy_gap", "no certified noise envelope"));
  } else {
    CheckEntry e("proxy_gap");
    Eigen::VectorXd v_prev = Eigen::VectorXd::Zero(r.d);
    for (Eigen::Index s = 0; s < T; ++s) {
      const double Gs = L ? budget->G_s[static_cast<std::size_t>(s)]
                          : gen_H(*spec, gen->L0, gen->L1, delta_x[static_cast<std::size_t>(s)]);
      const Eigen::VectorXd a = proxy_stepsize(v_prev, Gs, r.eps);
      const CheckEntry step = check_proxy_gap(a, traj.b.col(s), Gs, traj.g.col(s), s + 1);
      e.precondition_violations += step.precondition_violations;
      if (step.evaluated > 0) e.record(step.worst_slack, s + 1);
      v_prev = traj.v.col(s);
    }
    if (e.precondition_violations > 0)
      e.note = std::to_string(e.precondition_violations) + " steps with ||g_s|| above the budget were skipped";
    out.push_back(e);
  }

  double avg = 0.0;
  for (Eigen::Index s = 0; s < T; ++s) avg += traj.grad.col(s).squaredNorm();
  report.avg_grad_sq = T > 0 ? avg / static_cast<double>(T) : 0.0;

  if (report.bound1) {
    report.delta_event =
        std::all_of(delta_x.begin(), delta_x.end(), [&](double dx) { return dx <= report.bound1->Delta; });
    report.theorem_event = report.avg_grad_sq <= report.bound1->rhs;
  } else if (report.bound2) {
    report.delta_event =
        std::all_of(delta_x.begin(), delta_x.end(), [&](double dx) { return dx <= report.bound2->Lambda_x; });
    if (report.bound2->eta_ok) report.theorem_event = report.avg_grad_sq <= report.bound2->rhs;
  }
  return report;
}

IncrementModel parse_increment_model(const std::string& name) {
  if (name == "zero") return IncrementModel::Zero;
  if (name == "rademacher") return IncrementModel::Rademacher;
  if (name == "truncated-gaussian") return IncrementModel::TruncatedGaussian;
  throw std::invalid_argument("unknown increment model '" + name + "'");
}

double azuma_monte_carlo(IncrementModel model, double lambda, double delta, std::size_t T, std::size_t trials,
                         const CounterRng& rng) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (trials == 0) throw std::invalid_argument("need at least one trial");
  // sigma_s is constant per model, so the threshold is deterministic.
  const double sigma = model == IncrementModel::TruncatedGaussian ? 2.0 : 1.0;
  const double threshold =
      std::log(1.0 / delta) / lambda + 0.75 * lambda * static_cast<double>(T) * sigma * sigma;
  std::size_t violations = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    CounterRng trial = rng.split(k);
    double sum = 0.0;
    for (std::size_t s = 0; s < T; ++s) {
      switch (model) {
        case IncrementModel::Zero:
          break;
        case IncrementModel::Rademacher:
          sum += (trial() >> 63) ? 1.0 : -1.0;
          break;
        case IncrementModel::TruncatedGaussian: {
          double z;
          do {
            z = trial.normal();
          } while (std::abs(z) > 2.0);
          sum += z;
          break;
        }
      }
    }
    if (sum > threshold) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(trials);
}

double fit_loglog_rate(const std::vector<double>& T_grid, const std::vector<double>& metric) {
  if (T_grid.size() != metric.size()) throw std::invalid_argument("grid and metric lengths differ");
  if (T_grid.size() < 4) throw std::invalid_argument("rate fit needs at least 4 grid points");
  for (std::size_t i = 0; i < T_grid.size(); ++i) {
    if (!(T_grid[i] > 0.0) || (i > 0 && !(T_grid[i] > T_grid[i - 1])))
      throw std::invalid_argument("grid must be positive and strictly increasing");
    if (!(metric[i] > 0.0) || !std::isfinite(metric[i])) throw std::invalid_argument("metric must be positive");
  }
  const auto n = static_cast<Eigen::Index>(T_grid.size());
  Eigen::VectorXd lx(n), ly(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lx(i) = std::log(T_grid[static_cast<std::size_t>(i)]);
    ly(i) = std::log(metric[static_cast<std::size_t>(i)]);
  }
  const Eigen::VectorXd cx = lx.array() - lx.mean();
  const Eigen::VectorXd cy = ly.array() - ly.mean();
  return cx.dot(cy) / cx.squaredNorm();
}

HpFraction hp_fraction(const std::vector<bool>& results, double delta) {
  if (results.empty()) throw std::invalid_argument("hp_fraction needs at least one result");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const auto n = static_cast<double>(results.size());
  HpFraction out;
  out.fraction = static_cast<double>(std::count(results.begin(), results.end(), true)) / n;
  out.threshold = 1.0 - delta - 3.0 * std::sqrt(delta * (1.0 - delta) / n);
  out.pass = out.fraction >= out.threshold;
  return out;
}

}  // namespace adalab
