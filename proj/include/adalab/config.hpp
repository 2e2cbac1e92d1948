#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "adalab/analysis.hpp"
#include "adalab/optim.hpp"

namespace adalab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MethodSpec {
  Method method = Method::Adagrad;
  double eta = 0.1;
};

struct NoiseFitSettings {
  std::size_t steps = 5000;
  double eta = 5e-4;
  std::optional<Eigen::Vector3d> weights;  ///< default_fit_weights when absent
};

using Range = std::pair<double, double>;

/// Outcome checks beyond the invariant suite. Each one that is set counts as a
/// configured check for the exit code.
struct Expectations {
  bool decrease = false;  ///< final f and final ||grad f||^2 below their first recorded values
  std::optional<Range> slope;
  std::optional<Range> A, B, C;
};

enum class RecordMode { Full, Summary };

/// One experiment, loaded from YAML. See README for the schema.
struct ExperimentConfig {
  std::string problem;
  std::string data = "data/a9a";
  std::optional<double> f_star;   ///< overrides the problem's own value
  bool estimate_f_star = false;   ///< `f_star: estimate`
  std::size_t f_star_steps = 100000;
  double f_star_eta = 0.5;

  std::string oracle = "noiseless";  ///< full oracle id, e.g. "minibatch:batch=256"
  std::vector<MethodSpec> methods;
  HyperParams hyper;                 ///< eta is per method; horizon may come from epochs
  std::optional<std::size_t> epochs;

  std::vector<std::uint64_t> seeds{0};
  std::uint64_t master_seed = 0;
  std::vector<std::size_t> T_grid;
  double delta = 0.05;
  double C0 = 1.0;
  std::optional<BudgetMode> budget;  ///< sub-Gaussian for sub-Gaussian oracles when unset

  std::vector<std::string> checks;  ///< invariant names plus hp_delta, hp_theorem, a3
  RecordMode record = RecordMode::Full;
  std::size_t stride = 1;
  std::optional<bool> keep_trajectories;

  NoiseFitSettings noise_fit;
  Expectations expect;
  std::string out = "results";

  std::string source;  ///< normalized YAML text, used to fingerprint cells

  static ExperimentConfig from_yaml(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  /// Resolves problem/oracle ids syntactically and checks cross-field rules.
  void validate() const;
  bool has_check(const std::string& name) const;
  BudgetMode budget_mode() const;
};

/// Names accepted in `checks`.
const std::vector<std::string>& known_check_names();

/// 64-bit FNV-1a, used for cell fingerprints.
std::uint64_t fingerprint(const std::string& text);

}  // namespace adalab
