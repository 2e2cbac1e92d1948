#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adalab/optim.hpp"
#include "adalab/oracle.hpp"
#include "adalab/problem.hpp"
#include "adalab/rng.hpp"
#include "adalab/trajectory.hpp"

namespace adalab {

/// Relative tolerance for every inequality check.
inline constexpr double kSlackTolerance = 1e-9;

/// (rhs - lhs) scaled by the larger magnitude; 0 when both sides vanish.
double relative_slack(double lhs, double rhs);

enum class BudgetMode { Plain, Subgaussian };

struct NoiseBudget {
  double X = 0.0;
  std::vector<double> G_s;
  double G = 0.0;
  BudgetMode mode = BudgetMode::Plain;
};

/// X = 2A + 4LB + 4L, G_s = sqrt(X delta_x[s] + 2C), G = sqrt(X Delta + 2C); the
/// sub-Gaussian mode scales both by sqrt(log(e T / delta)).
NoiseBudget compute_noise_budget(const NoiseSpec& spec, double L, const std::vector<double>& delta_x, double Delta,
                                 std::size_t T, double delta, BudgetMode mode = BudgetMode::Plain);

/// a_i = sqrt(v_prev_i + G_s^2) + eps.
Eigen::VectorXd proxy_stepsize(const Eigen::VectorXd& v_prev, double G_s, double epsilon);

enum class CheckStatus { Pass, Fail, NotApplicable };
std::string to_string(CheckStatus status);

/// One named inequality evaluated over many steps. `worst_slack` is relative
/// (see relative_slack) except for the y-identity, where it is tolerance minus
/// the absolute residual.
struct CheckEntry {
  std::string name;
  CheckStatus status = CheckStatus::NotApplicable;
  double worst_slack = 0.0;
  long worst_step = -1;
  std::size_t evaluated = 0;
  std::size_t precondition_violations = 0;
  std::string note;

  static CheckEntry not_applicable(std::string name, std::string why);
  explicit CheckEntry(std::string n = {}) : name(std::move(n)) {}
  /// Records one evaluation; the entry passes iff every slack >= -kSlackTolerance.
  void record(double slack, long step);
  void record_inequality(double lhs, double rhs, long step) { record(relative_slack(lhs, rhs), step); }
  bool failed() const { return status == CheckStatus::Fail; }
};

/// gap_as_bs at one step: |1/a - 1/b| <= G_s/(a b) coordinate-wise, evaluated only
/// when ||g|| <= G_s (otherwise a precondition violation is counted).
CheckEntry check_proxy_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double G_s, const Eigen::VectorXd& g,
                           long step = 0);

/// RHS - LHS of sum_s alpha_s / (eps + sum_{k<=s} alpha_k) <= log(1 + sum alpha / eps).
double check_logsum(const std::vector<double>& alpha, double eps);

/// ||grad f||^2 <= 2L (f - f*) or ||grad f|| <= max{4 L1 (f - f*), sqrt(4 L0 (f - f*))}.
CheckEntry check_smooth_grad_bound(const Problem& problem, const std::vector<Eigen::VectorXd>& points);

/// Displacement caps max{|x_{s+1}-x_s|, |y_s-x_s|, |y_{s+1}-y_s|} <= eta sqrt(d)/(1-beta)^2,
/// plus the 1/L1 cap when L1 is given and eta <= (1-beta)^2/(L1 sqrt(d)).
std::vector<CheckEntry> check_gap_xs_ys(const TrajectoryRecord& traj, const YSequence& y,
                                        std::optional<double> L1 = std::nullopt);

/// f(x_1) - f*, ||grad f(x_1)|| and d, the only run-specific inputs of the bounds.
struct InitialInfo {
  double delta_x1 = 0.0;
  double grad_norm = 0.0;
  Eigen::Index d = 0;
};
InitialInfo initial_info(const Problem& problem, const Eigen::VectorXd& x1);

struct TheoremBound {
  double F_T = 0.0;
  double Delta = 0.0;
  double Delta1 = 0.0;
  double B1 = 0.0;
  double X = 0.0;
  double G = 0.0;
  double L_tilde = 0.0;
  double rhs = 0.0;
  std::size_t T = 0;
  double delta = 0.0;
};

/// The explicit global-smooth bound: F_T, Delta and
/// rhs = 2 Delta1 [(Delta1 B1 + G + eps)/T + sqrt(2 (A Delta + C)/T)].
TheoremBound compute_theorem1_bound(const InitialInfo& init, const NoiseSpec& spec, double L, const HyperParams& hyper,
                                    std::size_t T, double delta, BudgetMode mode = BudgetMode::Plain);

/// F_t for a general horizon t (F_T above is poly_F(T)).
double poly_F(const InitialInfo& init, const NoiseSpec& spec, double L, const HyperParams& hyper, double t);

struct GenSmoothBound {
  double H = 0.0;
  double L = 0.0;
  double C0 = 0.0;
  double eta_max = 0.0;
  bool eta_ok = false;  ///< eta <= eta_max; the bound is inapplicable otherwise
  double Lambda_y = 0.0;
  double Lambda_y_tilde = 0.0;
  double Lambda_x = 0.0;
  double I_T = 0.0;  ///< polynomial bound on sum Delta^(x) with L_s replaced by its cap
  double J_T = 0.0;
  double rhs = 0.0;
  std::size_t T = 0;
  double delta = 0.0;
};

GenSmoothBound compute_theorem2_bound(const InitialInfo& init, const NoiseSpec& spec, double L0, double L1,
                                      const HyperParams& hyper, double C0, std::size_t T, double delta);

/// H_s and L_s for a single gap value.
double gen_H(const NoiseSpec& spec, double L0, double L1, double gap);
double gen_L(double L0, double L1, double gap);

struct CheckOptions {
  double delta = 0.05;
  BudgetMode mode = BudgetMode::Plain;
  double C0 = 1.0;
};

/// Per-trajectory result: the deterministic lemma checks plus the two
/// probability-(1-delta) events, which are tallied separately.
struct InvariantReport {
  std::vector<CheckEntry> entries;
  std::optional<bool> delta_event;    ///< Delta^(x)_t <= Delta (or Lambda_x) for every t
  std::optional<bool> theorem_event;  ///< (1/T) sum ||grad f||^2 <= rhs
  std::optional<TheoremBound> bound1;
  std::optional<GenSmoothBound> bound2;
  double avg_grad_sq = 0.0;

  bool passed() const;
  const CheckEntry* find(const std::string& name) const;
};

/// Every lemma check that applies to the trajectory. Checks whose inputs are
/// missing (f*, smoothness metadata, a noise envelope) are reported as
/// not-applicable, never as passes.
InvariantReport check_trajectory_invariants(const TrajectoryRecord& traj, const Problem& problem,
                                            const std::optional<NoiseSpec>& spec, const CheckOptions& options = {});

/// Names produced by check_trajectory_invariants, in report order.
const std::vector<std::string>& invariant_check_names();

enum class IncrementModel { Zero, Rademacher, TruncatedGaussian };
IncrementModel parse_increment_model(const std::string& name);

/// Fraction of `trials` length-T sequences whose sum exceeds
/// (1/lambda) log(1/delta) + (3/4) lambda sum sigma^2. Trial k uses rng.split(k).
double azuma_monte_carlo(IncrementModel model, double lambda, double delta, std::size_t T, std::size_t trials,
                         const CounterRng& rng);

/// Least-squares slope of log(metric) against log(T).
double fit_loglog_rate(const std::vector<double>& T_grid, const std::vector<double>& metric);

struct HpFraction {
  double fraction = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// pass iff fraction >= 1 - delta - 3 sqrt(delta (1 - delta) / n).
HpFraction hp_fraction(const std::vector<bool>& results, double delta);

}  // namespace adalab
