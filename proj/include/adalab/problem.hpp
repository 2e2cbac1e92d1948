#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "adalab/dataset.hpp"
#include "adalab/rng.hpp"

namespace adalab {

struct GlobalL {
  double L;
};

struct Generalized {
  double L0;
  double L1;
};

using Smoothness = std::variant<GlobalL, Generalized>;

class Objective {
 public:
  virtual ~Objective() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double value(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
  /// Both at once; objectives that share work between the two override this.
  virtual std::pair<double, Eigen::VectorXd> value_and_gradient(const Eigen::VectorXd& x) const {
    return {value(x), gradient(x)};
  }
};

/// f(x) = (1/n) sum_i f_i(x); the minibatch oracle needs per-example gradients.
class FiniteSumObjective : public Objective {
 public:
  virtual Eigen::Index n() const = 0;
  /// Average of the per-example gradients over `indices` (duplicates allowed).
  virtual Eigen::VectorXd batch_gradient(const Eigen::VectorXd& x, std::span<const int> indices) const = 0;
  /// Upper bound on max_i ||grad f_i(x) - grad f(x)|| valid for every x.
  virtual double deviation_bound() const = 0;
};

/// An objective plus the metadata the analysis needs. Immutable once built;
/// copies share the objective.
class Problem {
 public:
  Problem(std::string id, std::shared_ptr<const Objective> objective, Eigen::VectorXd initial_point,
          std::optional<double> f_star = std::nullopt, std::optional<Smoothness> smoothness = std::nullopt);

  const std::string& id() const { return id_; }
  Eigen::Index dim() const { return objective_->dim(); }
  double value(const Eigen::VectorXd& x) const { return objective_->value(x); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return objective_->gradient(x); }
  std::pair<double, Eigen::VectorXd> value_and_gradient(const Eigen::VectorXd& x) const {
    return objective_->value_and_gradient(x);
  }
  const std::optional<double>& f_star() const { return f_star_; }
  const std::optional<Smoothness>& smoothness() const { return smoothness_; }
  const Eigen::VectorXd& initial_point() const { return initial_point_; }
  const Objective& objective() const { return *objective_; }
  /// Null unless the objective is a finite sum.
  const FiniteSumObjective* finite_sum() const;

  std::optional<double> global_L() const;
  std::optional<Generalized> generalized() const;

  Problem with_f_star(double f_star) const;
  Problem with_smoothness(Smoothness s) const;
  Problem with_id(std::string id) const;

 private:
  std::string id_;
  std::shared_ptr<const Objective> objective_;
  Eigen::VectorXd initial_point_;
  std::optional<double> f_star_;
  std::optional<Smoothness> smoothness_;
};

/// f(x) = (L/2)||x - x_star||^2.
Problem make_quadratic(Eigen::Index d, double L, const Eigen::VectorXd& x_star);

/// f(x) = sum_j x_j^4, with a certified (L0, L1) pair.
Problem make_quartic_gs(Eigen::Index d);

/// (1/n) sum_i log(1 + exp(-a_i.x)) + lambda sum_j x_j^2/(1 + x_j^2).
/// With `fold_labels` a_i = y_i * row_i, otherwise a_i = row_i literally.
Problem make_reg_logistic(const Dataset& data, double lambda, bool fold_labels = true);

/// Deterministic full-batch AdaGrad; returns (best value seen) - margin.
double estimate_f_star(const Problem& problem, std::size_t steps = 100000, double eta = 0.5,
                       double margin = 1e-6);

struct ProbeBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  static ProbeBox cube(Eigen::Index d, double half_width);
};

struct ProbeResult {
  /// GlobalL when the sampled gradient-difference ratios stay inside the grid with
  /// no dependence on the gradient norm; Generalized otherwise.
  std::optional<Smoothness> estimate;
  double max_ratio = 0.0;  ///< largest ||grad f(y) - grad f(x)|| / ||y - x|| over the widest pairs
  std::optional<Generalized> grid_fit;
  bool exceeds_grid = false;
};

/// Grid exponents for (L0, L1) candidates: 2^-10 .. 2^10.
inline constexpr int kProbeGridMinExp = -10;
inline constexpr int kProbeGridMaxExp = 10;

/// Samples x in `box`, y = x + r u with u uniform on the sphere and r uniform in
/// (0, 1/L1], and returns the smallest grid (L0, L1) (smallest L1 first) with
/// ||grad f(y) - grad f(x)|| <= (L0 + L1 ||grad f(x)||) ||x - y|| on every sample.
ProbeResult smoothness_probe(const Problem& problem, const ProbeBox& box, std::size_t n_pairs, CounterRng& rng);

/// Exact check that f = sum x^4 is (L0, L1)-smooth: the worst case over t = max|x_j|
/// of 12 (t + 1/L1)^2 - 4 L1 t^3 must not exceed L0.
bool quartic_certificate_holds(double L0, double L1);

/// Problem ids: "quadratic:d=10,L=2", "quartic:d=4", "a9a-reglog:lambda=0.1[,subsample=500][,literal=1]".
/// `data_path` is used by the a9a family.
Problem make_problem(const std::string& id, const std::string& data_path = "data/a9a");

}  // namespace adalab
