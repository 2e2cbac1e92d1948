#pragma once

#include <vector>

#include <Eigen/Core>

#include "adalab/rng.hpp"

namespace adalab {

struct LpResult {
  bool feasible = false;
  Eigen::VectorXd x;
};

/// Randomized incremental (Seidel) LP for small dimension:
/// lexicographically minimize (c_1.x, c_2.x, ...) subject to rows(A) x >= b and
/// lower <= x <= upper. The box must be finite. Coordinates not fixed by the
/// objectives are pushed to their lower bound, so the answer is unique.
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const std::vector<Eigen::VectorXd>& objectives,
                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, CounterRng& rng);

}  // namespace adalab
