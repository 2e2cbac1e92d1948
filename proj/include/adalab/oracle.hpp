#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adalab/optim.hpp"
#include "adalab/problem.hpp"
#include "adalab/rng.hpp"

namespace adalab {

/// Almost-sure envelope ||g - grad f||^2 <= A (f - f*) + B ||grad f||^2 + C.
struct NoiseSpec {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;

  void validate() const;
  double envelope(double gap, double grad_sq) const { return A * gap + B * grad_sq + C; }
};

/// u = f(x) - f*, v = ||grad f(x)||^2, n = ||g - grad f(x)||^2.
struct NoiseSample {
  double u = 0.0;
  double v = 0.0;
  double n = 0.0;
};

struct NoiseFit {
  NoiseSpec spec;
  double max_slack = 0.0;  ///< largest A u + B v + C - n over the samples
  double min_slack = 0.0;  ///< smallest one; >= 0 up to rounding
  double cost = 0.0;
  std::size_t n_samples = 0;
};

/// A stochastic gradient source. Draws are pure functions of (x, rng state);
/// `grad` is the exact gradient at x, passed in so callers do not pay for it twice.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::string id() const = 0;
  virtual Eigen::VectorXd draw(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                               CounterRng& rng) const = 0;
  /// An envelope the oracle satisfies by construction, if one is known.
  virtual std::optional<NoiseSpec> certified_spec(const Problem& problem) const = 0;
  /// Sub-Gaussian rather than almost-surely bounded noise.
  virtual bool subgaussian() const { return false; }
  /// False when `draw` ignores its `grad` argument (callers may then pass an empty vector).
  virtual bool needs_gradient() const { return true; }
};

struct MinibatchDraw {
  Eigen::VectorXd g;
  std::vector<int> indices;  ///< sorted, distinct
};

/// Average of per-example gradients over `batch_size` indices drawn uniformly
/// without replacement.
MinibatchDraw minibatch_draw(const FiniteSumObjective& objective, const Eigen::VectorXd& x, Eigen::Index batch_size,
                             CounterRng& rng);

/// g = grad f(x) + sigma(x) r e with sigma^2 the envelope at x, r ~ U[0,1] and e a
/// random sign vector scaled to unit norm.
Eigen::VectorXd synthetic_a3_draw(const Problem& problem, const NoiseSpec& spec, const Eigen::VectorXd& x,
                                  CounterRng& rng);

/// g = grad f(x) + N(0, (sigma2/d) I).
Eigen::VectorXd gaussian_draw(const Problem& problem, double sigma2, const Eigen::VectorXd& x, CounterRng& rng);

class NoiselessOracle final : public Oracle {
 public:
  std::string id() const override { return "noiseless"; }
  Eigen::VectorXd draw(const Problem&, const Eigen::VectorXd&, const Eigen::VectorXd& grad,
                       CounterRng&) const override {
    return grad;
  }
  std::optional<NoiseSpec> certified_spec(const Problem&) const override { return NoiseSpec{}; }
};

class MinibatchOracle final : public Oracle {
 public:
  explicit MinibatchOracle(Eigen::Index batch_size);
  std::string id() const override;
  Eigen::VectorXd draw(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                       CounterRng& rng) const override;
  /// (0, 0, R^2) with R the objective's deviation bound.
  std::optional<NoiseSpec> certified_spec(const Problem& problem) const override;
  bool needs_gradient() const override { return false; }
  Eigen::Index batch_size() const { return batch_size_; }

 private:
  Eigen::Index batch_size_;
};

class SyntheticA3Oracle final : public Oracle {
 public:
  explicit SyntheticA3Oracle(NoiseSpec spec);
  std::string id() const override;
  Eigen::VectorXd draw(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                       CounterRng& rng) const override;
  std::optional<NoiseSpec> certified_spec(const Problem&) const override { return spec_; }
  const NoiseSpec& spec() const { return spec_; }

 private:
  NoiseSpec spec_;
};

class GaussianOracle final : public Oracle {
 public:
  explicit GaussianOracle(double sigma2);
  std::string id() const override;
  Eigen::VectorXd draw(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                       CounterRng& rng) const override;
  std::optional<NoiseSpec> certified_spec(const Problem&) const override { return std::nullopt; }
  bool subgaussian() const override { return true; }
  double sigma2() const { return sigma2_; }

 private:
  double sigma2_;
};

/// Ids: "noiseless", "minibatch:batch=256", "synthetic-a3:A=1,B=1,C=1", "gaussian:sigma2=1".
std::shared_ptr<const Oracle> make_oracle(const std::string& id);

/// Weights (mean u, mean v, 1); a weight whose column is all zero is replaced by 1.
Eigen::Vector3d default_fit_weights(const std::vector<NoiseSample>& samples);

/// Cheapest envelope w.A + w.B + w.C covering every sample, ties toward smaller B,
/// then smaller A.
NoiseFit estimate_noise_params(const std::vector<NoiseSample>& samples,
                               const std::optional<Eigen::Vector3d>& weights = std::nullopt);

/// Runs plain AdaGrad from `x1` with the oracle's gradients and records one sample
/// per step. Needs problem.f_star().
std::vector<NoiseSample> collect_noise_samples(const Problem& problem, const Oracle& oracle, const HyperParams& hyper,
                                               std::size_t steps, CounterRng& rng);

/// Largest ||g - grad f||^2 / envelope over `trials_per_point` draws at each point;
/// +inf when the envelope is zero but the noise is not. f* is only needed when A > 0.
double verify_a3(const Oracle& oracle, const Problem& problem, const NoiseSpec& spec,
                 const std::vector<Eigen::VectorXd>& probe_points, std::size_t trials_per_point, CounterRng& rng);

}  // namespace adalab
