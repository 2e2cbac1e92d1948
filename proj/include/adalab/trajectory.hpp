#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "adalab/optim.hpp"
#include "adalab/oracle.hpp"
#include "adalab/problem.hpp"

namespace adalab {

/// Column s-1 holds step s (1-based). `x`, `grad` and `f` carry one extra column
/// for the point x_{T+1} reached after the last step.
struct TrajectoryRecord {
  std::string problem_id;
  std::string oracle_id;
  Method method = Method::AdagradMomentum;
  HyperParams hyper;
  std::uint64_t seed = 0;
  std::uint64_t master_seed = 0;

  Eigen::MatrixXd x;     // d x (T+1)
  Eigen::MatrixXd grad;  // d x (T+1)
  Eigen::VectorXd f;     // T+1
  Eigen::MatrixXd g;     // d x T
  Eigen::MatrixXd v;     // d x T, or 1 x T for AdaGrad-Norm
  Eigen::MatrixXd m;     // d x T
  Eigen::MatrixXd b;     // same shape as v

  std::size_t steps = 0;  ///< completed steps; < horizon only when diverged
  bool diverged = false;

  bool complete() const { return !diverged && steps == hyper.horizon; }
  Eigen::Index dim() const { return x.rows(); }
};

/// Scalar series only, sampled every `stride` steps, for runs too long to keep in full.
struct TrajectorySummary {
  std::string problem_id;
  std::string oracle_id;
  Method method = Method::AdagradMomentum;
  HyperParams hyper;
  std::uint64_t seed = 0;
  std::vector<std::size_t> step;  // 1-based step of each sample
  std::vector<double> f;
  std::vector<double> grad_sq;
  std::size_t steps = 0;
  bool diverged = false;
  Eigen::VectorXd x_final;
};

struct RunOptions {
  std::uint64_t master_seed = 0;
  std::optional<Eigen::VectorXd> x1;  ///< defaults to the problem's initial point
};

/// The random stream is CounterRng(master_seed, seed). A non-finite value, gradient
/// or iterate stops the run and sets `diverged`; the record keeps the finished steps.
TrajectoryRecord run_trajectory(const Problem& problem, const Oracle& oracle, Method method, const HyperParams& hyper,
                                std::uint64_t seed, const RunOptions& options = {});

/// Same dynamics as run_trajectory (bit-identical iterates) but records f and
/// ||grad f||^2 only at steps 1, 1+stride, ... and at the final point.
TrajectorySummary run_summary(const Problem& problem, const Oracle& oracle, Method method, const HyperParams& hyper,
                              std::uint64_t seed, std::size_t stride, const RunOptions& options = {});

struct YSequence {
  Eigen::MatrixXd y;  // d x (T+1)
  double max_residual = 0.0;
};

inline constexpr double kYResidualTolerance = 1e-10;

/// y-sequence and identity residual without the tolerance check.
YSequence compute_y_sequence(const TrajectoryRecord& traj);

/// y_1 = x_1, y_s = beta/(1-beta) (x_s - x_{s-1}) + x_s, then checks
/// y_{s+1} = y_s - eta/(1-beta) g_s/b_s coordinate-wise; throws std::logic_error when
/// the residual exceeds kYResidualTolerance.
YSequence derive_y_sequence(const TrajectoryRecord& traj);

}  // namespace adalab
