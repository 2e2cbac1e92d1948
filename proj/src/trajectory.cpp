#include "adalab/trajectory.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

namespace adalab {

namespace {

Eigen::VectorXd denominator(const Eigen::VectorXd& v, double eps) { return (v.cwiseSqrt().array() + eps).matrix(); }

void check_inputs(const Problem& problem, const HyperParams& hyper, const RunOptions& options) {
  hyper.validate();
  if (options.x1 && options.x1->size() != problem.dim())
    throw std::invalid_argument("initial point has the wrong dimension");
}

}  // namespace

TrajectoryRecord run_trajectory(const Problem& problem, const Oracle& oracle, Method method, const HyperParams& hyper,
                                std::uint64_t seed, const RunOptions& options) {
  check_inputs(problem, hyper, options);
  const Eigen::Index d = problem.dim();
  const auto T = static_cast<Eigen::Index>(hyper.horizon);
  const Eigen::Index vd = uses_scalar_accumulator(method) ? 1 : d;

  TrajectoryRecord rec;
  rec.problem_id = problem.id();
  rec.oracle_id = oracle.id();
  rec.method = method;
  rec.hyper = hyper;
  rec.seed = seed;
  rec.master_seed = options.master_seed;
  rec.x.resize(d, T + 1);
  rec.grad.resize(d, T + 1);
  rec.f.resize(T + 1);
  rec.g.resize(d, T);
  rec.v.resize(vd, T);
  rec.m.resize(d, T);
  rec.b.resize(vd, T);

  CounterRng rng(options.master_seed, seed);
  auto state = OptimizerState<double>::initial(options.x1 ? *options.x1 : problem.initial_point(),
                                               uses_scalar_accumulator(method));
  Eigen::Index s = 0;
  for (;; ++s) {
    const auto [f, grad] = problem.value_and_gradient(state.x);
    if (!std::isfinite(f) || !grad.allFinite() || !state.x.allFinite()) {
      rec.diverged = true;
      break;
    }
    rec.x.col(s) = state.x;
    rec.grad.col(s) = grad;
    rec.f(s) = f;
    if (s == T) break;

    const Eigen::VectorXd g = oracle.draw(problem, state.x, grad, rng);
    if (!g.allFinite()) {
      rec.diverged = true;
      break;
    }
    state = optimizer_step(method, state, g, hyper);
    rec.g.col(s) = g;
    rec.v.col(s) = state.v;
    rec.m.col(s) = state.m;
    rec.b.col(s) = denominator(state.v, hyper.epsilon);
  }
  rec.steps = static_cast<std::size_t>(rec.diverged ? std::max<Eigen::Index>(s - 1, 0) : s);
  if (rec.diverged) {
    // Keep only what was fully recorded: steps 1..s-1 plus the point x_s.
    const Eigen::Index k = static_cast<Eigen::Index>(rec.steps);
    rec.x.conservativeResize(d, std::min(s, T + 1));
    rec.grad.conservativeResize(d, std::min(s, T + 1));
    rec.f.conservativeResize(std::min(s, T + 1));
    rec.g.conservativeResize(d, k);
    rec.v.conservativeResize(vd, k);
    rec.m.conservativeResize(d, k);
    rec.b.conservativeResize(vd, k);
  }
  return rec;
}

TrajectorySummary run_summary(const Problem& problem, const Oracle& oracle, Method method, const HyperParams& hyper,
                              std::uint64_t seed, std::size_t stride, const RunOptions& options) {
  check_inputs(problem, hyper, options);
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  TrajectorySummary out;
  out.problem_id = problem.id();
  out.oracle_id = oracle.id();
  out.method = method;
  out.hyper = hyper;
  out.seed = seed;

  CounterRng rng(options.master_seed, seed);
  auto state = OptimizerState<double>::initial(options.x1 ? *options.x1 : problem.initial_point(),
                                               uses_scalar_accumulator(method));
  const bool need_grad = oracle.needs_gradient();
  const std::size_t T = hyper.horizon;
  for (std::size_t s = 0;; ++s) {
    const bool sample = (s % stride == 0) || s == T;
    Eigen::VectorXd grad;
    double f = 0.0;
    if (sample) {
      std::tie(f, grad) = problem.value_and_gradient(state.x);
    } else if (need_grad) {
      grad = problem.gradient(state.x);
    }
    if (sample) {
      if (!std::isfinite(f) || !grad.allFinite()) {
        out.diverged = true;
        break;
      }
      out.step.push_back(s + 1);
      out.f.push_back(f);
      out.grad_sq.push_back(grad.squaredNorm());
    }
    if (s == T) break;
    const Eigen::VectorXd g = oracle.draw(problem, state.x, grad, rng);
    if (!g.allFinite()) {
      out.diverged = true;
      break;
    }
    state = optimizer_step(method, state, g, hyper);
    out.steps = s + 1;
  }
  out.x_final = state.x;
  return out;
}

YSequence compute_y_sequence(const TrajectoryRecord& traj) {
  if (traj.method == Method::Sgd) throw std::invalid_argument("the y-sequence is defined for the AdaGrad family");
  const double beta = effective_beta(traj.method, traj.hyper);
  const double eta = traj.hyper.eta;
  const Eigen::Index d = traj.dim();
  const auto T = static_cast<Eigen::Index>(traj.steps);
  if (traj.x.cols() < T + 1) throw std::invalid_argument("trajectory is missing its final point");

  YSequence out;
  out.y.resize(d, T + 1);
  const double k = beta / (1.0 - beta);
  out.y.col(0) = traj.x.col(0);
  for (Eigen::Index s = 1; s <= T; ++s) out.y.col(s) = k * (traj.x.col(s) - traj.x.col(s - 1)) + traj.x.col(s);

  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::VectorXd b =
        traj.b.rows() == 1 ? Eigen::VectorXd::Constant(d, traj.b(0, s)) : Eigen::VectorXd(traj.b.col(s));
    const Eigen::VectorXd predicted = out.y.col(s) - (eta / (1.0 - beta)) * traj.g.col(s).cwiseQuotient(b);
    out.max_residual = std::max(out.max_residual, (out.y.col(s + 1) - predicted).cwiseAbs().maxCoeff());
  }
  return out;
}

YSequence derive_y_sequence(const TrajectoryRecord& traj) {
  YSequence out = compute_y_sequence(traj);
  if (!(out.max_residual <= kYResidualTolerance))
    throw std::logic_error("y-sequence identity residual " + std::to_string(out.max_residual) + " exceeds tolerance");
  return out;
}

}  // namespace adalab
