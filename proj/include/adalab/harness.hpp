#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adalab/config.hpp"
#include "adalab/oracle.hpp"
#include "adalab/problem.hpp"

namespace adalab {

/// One line of results.csv. Unset optionals are written as NA.
struct ResultRow {
  std::uint64_t seed = 0;
  std::size_t T = 0;
  std::string method;
  double final_f = 0.0;
  double avg_grad_sq = 0.0;  ///< (1/T) sum_{s<=T} ||grad f(x_s)||^2; inf for a diverged run
  double min_grad_sq = 0.0;
  std::optional<double> bound_rhs;
  std::optional<bool> a3_verified;
  std::optional<bool> invariants_pass;
  std::optional<bool> hp_event;
  double wall_ms = 0.0;
};

const std::vector<std::string>& result_columns();
std::string results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

struct HarnessOptions {
  std::optional<std::uint64_t> master_seed;  ///< overrides the config
  std::optional<std::string> out;            ///< overrides the config
  unsigned jobs = 1;
  std::ostream* log = nullptr;
};

/// `failures` holds one message per configured check that did not pass; the
/// command succeeds iff it is empty.
struct RunOutcome {
  std::string out_dir;
  std::vector<ResultRow> rows;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

struct SweepOutcome : RunOutcome {
  struct MethodSlope {
    std::string method;
    std::vector<double> T;       ///< grid points with at least one usable cell
    std::vector<double> median;  ///< median avg_grad_sq per T
    std::optional<double> slope;
  };
  std::vector<MethodSlope> slopes;
  std::vector<std::string> excluded;  ///< diverged cells
};

struct NoiseFitOutcome {
  std::string out_dir;
  NoiseFit fit;
  double f_star = 0.0;
  std::string protocol;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

struct ReportOutcome {
  std::vector<std::string> files;
  std::size_t loss_series = 0;
  std::size_t grad_series = 0;
  std::string summary;
};

/// Builds the problem and applies `f_star` (a number, or an estimate cached in
/// out_dir/f_star.json). Unresolvable ids raise ConfigError.
Problem resolve_problem(const ExperimentConfig& config, const std::string& out_dir, std::ostream* log = nullptr);

/// The configured horizon, or epochs * ceil(n / batch) for epoch-based configs.
std::size_t resolved_horizon(const ExperimentConfig& config, const Problem& problem);

/// One cell per (method, seed) at the resolved horizon.
RunOutcome run_experiment(const ExperimentConfig& config, const HarnessOptions& options = {});

/// One cell per (method, T, seed) over T_grid, then a log-log slope per method.
SweepOutcome sweep_rates(const ExperimentConfig& config, const HarnessOptions& options = {});

/// Samples along a fresh plain-AdaGrad path and fits the cheapest envelope.
NoiseFitOutcome estimate_noise_cmd(const ExperimentConfig& config, const HarnessOptions& options = {});

/// Re-runs the invariant suite on trajectories stored by a previous `run`.
RunOutcome check_stored(const ExperimentConfig& config, const HarnessOptions& options = {});

/// Charts and the text summary for a results directory written by run or sweep.
ReportOutcome emit_report(const std::string& dir);

}  // namespace adalab
