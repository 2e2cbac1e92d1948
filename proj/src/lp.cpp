#include "adalab/lp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace adalab {

namespace {

struct Halfspace {
  Eigen::VectorXd a;
  double b;
};

constexpr double kTol = 1e-12;

bool satisfied(const Halfspace& h, const Eigen::VectorXd& x) {
  const double lhs = h.a.dot(x);
  const double scale = std::max({1.0, std::abs(h.b), (h.a.cwiseAbs().array() * x.cwiseAbs().array()).sum()});
  return lhs >= h.b - kTol * scale;
}

// Lexicographic optimum over a box: each coordinate goes to the bound favoured
// by the first objective that depends on it.
Eigen::VectorXd box_vertex(const std::vector<Eigen::VectorXd>& objs, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi) {
  Eigen::VectorXd x = lo;
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    for (const auto& c : objs) {
      if (c(j) > 0.0) break;
      if (c(j) < 0.0) {
        x(j) = hi(j);
        break;
      }
    }
  }
  return x;
}

Eigen::VectorXd drop(const Eigen::VectorXd& v, Eigen::Index j) {
  Eigen::VectorXd out(v.size() - 1);
  out.head(j) = v.head(j);
  out.tail(v.size() - 1 - j) = v.tail(v.size() - 1 - j);
  return out;
}

LpResult seidel(const std::vector<Halfspace>& hs, const std::vector<Eigen::VectorXd>& objs, const Eigen::VectorXd& lo,
                const Eigen::VectorXd& hi, CounterRng& rng) {
  const Eigen::Index k = lo.size();
  if (k == 0) {
    for (const auto& h : hs)
      if (h.b > kTol * std::max(1.0, std::abs(h.b))) return {};
    return {true, Eigen::VectorXd()};
  }

  std::vector<std::size_t> order(hs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  Eigen::VectorXd x = box_vertex(objs, lo, hi);
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    const Halfspace& h = hs[order[idx]];
    if (satisfied(h, x)) continue;

    Eigen::Index j = 0;
    const double pivot_abs = h.a.cwiseAbs().maxCoeff(&j);
    if (pivot_abs == 0.0) return {};

    // On the hyperplane: x_j = p0 + p . y, with y the other coordinates.
    const double aj = h.a(j);
    const double p0 = h.b / aj;
    const Eigen::VectorXd p = -drop(h.a, j) / aj;

    std::vector<Halfspace> sub;
    sub.reserve(idx + 2);
    for (std::size_t prev = 0; prev < idx; ++prev) {
      const Halfspace& g = hs[order[prev]];
      sub.push_back({drop(g.a, j) + g.a(j) * p, g.b - g.a(j) * p0});
    }
    sub.push_back({p, lo(j) - p0});
    sub.push_back({-p, p0 - hi(j)});

    std::vector<Eigen::VectorXd> sub_objs;
    sub_objs.reserve(objs.size());
    for (const auto& c : objs) sub_objs.push_back(drop(c, j) + c(j) * p);

    const LpResult r = seidel(sub, sub_objs, drop(lo, j), drop(hi, j), rng);
    if (!r.feasible) return {};
    x.resize(k);
    x.head(j) = r.x.head(j);
    x.tail(k - 1 - j) = r.x.tail(k - 1 - j);
    x(j) = p0 + p.dot(r.x);
  }
  return {true, x};
}

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const std::vector<Eigen::VectorXd>& objectives,
                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, CounterRng& rng) {
  const Eigen::Index k = lower.size();
  if (upper.size() != k || A.cols() != k || A.rows() != b.size())
    throw std::invalid_argument("LP dimensions disagree");
  if (!lower.allFinite() || !upper.allFinite() || (upper.array() < lower.array()).any())
    throw std::invalid_argument("LP box must be finite and nonempty");

  std::vector<Eigen::VectorXd> objs;
  for (const auto& c : objectives) {
    if (c.size() != k) throw std::invalid_argument("objective has the wrong dimension");
    objs.push_back(c);
  }
  for (Eigen::Index j = 0; j < k; ++j) objs.push_back(Eigen::VectorXd::Unit(k, j));

  std::vector<Halfspace> hs;
  hs.reserve(static_cast<std::size_t>(A.rows()));
  for (Eigen::Index i = 0; i < A.rows(); ++i) hs.push_back({A.row(i).transpose(), b(i)});
  return seidel(hs, objs, lower, upper, rng);
}

}  // namespace adalab
