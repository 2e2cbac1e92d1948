#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adalab/optim.hpp"
#include "adalab/oracle.hpp"
#include "adalab/problem.hpp"
#include "adalab/trajectory.hpp"

using namespace adalab;
using Vec = Eigen::VectorXd;

namespace {

HyperParams hp(double eta, double beta, double eps, std::size_t T = 10) {
  HyperParams h;
  h.eta = eta;
  h.beta = beta;
  h.epsilon = eps;
  h.horizon = T;
  return h;
}

OptimizerState<double> state(const Vec& x, const Vec& v, const Vec& m) {
  OptimizerState<double> s;
  s.x = x;
  s.v = v;
  s.m = m;
  return s;
}

}  // namespace

TEST_CASE("one momentum step by hand") {
  const auto s = state(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2));
  const auto n = adagrad_momentum_step(s, Vec{{3.0, 4.0}}, hp(1.0, 0.0, 1.0));
  CHECK(n.v(0) == 9.0);
  CHECK(n.v(1) == 16.0);
  CHECK(n.m(0) == doctest::Approx(-0.75).epsilon(1e-15));
  CHECK(n.m(1) == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK(n.x(0) == doctest::Approx(-0.75).epsilon(1e-15));
  CHECK(n.x(1) == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK(n.step == 1);
}

TEST_CASE("zero gradient with zero momentum leaves the state in place") {
  const auto s = state(Vec{{1.0, -2.0}}, Vec{{4.0, 1.0}}, Vec::Zero(2));
  const auto n = adagrad_momentum_step(s, Vec(Vec::Zero(2)), hp(0.3, 0.9, 1e-8));
  CHECK(n.x == s.x);
  CHECK(n.v == s.v);
  CHECK(n.m == Vec::Zero(2));
}

TEST_CASE("beta = 0 is textbook AdaGrad") {
  CounterRng rng(7);
  auto s = OptimizerState<double>::initial(Vec::Zero(5));
  Vec x = Vec::Zero(5), v = Vec::Zero(5);
  const auto h = hp(0.2, 0.0, 1e-3);
  for (int k = 0; k < 200; ++k) {
    const Vec g = rng.normal_vector(5);
    s = adagrad_momentum_step(s, g, h);
    for (int i = 0; i < 5; ++i) {
      v(i) += g(i) * g(i);
      x(i) -= 0.2 * g(i) / (std::sqrt(v(i)) + 1e-3);
    }
  }
  CHECK((s.x - x).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + x.cwiseAbs().maxCoeff()));
  // The Adagrad method ignores a configured beta.
  auto a = OptimizerState<double>::initial(Vec::Zero(3));
  auto b = a;
  for (int k = 0; k < 20; ++k) {
    const Vec g = rng.normal_vector(3);
    a = optimizer_step(Method::Adagrad, a, g, hp(0.1, 0.9, 1e-8));
    b = optimizer_step(Method::AdagradMomentum, b, g, hp(0.1, 0.0, 1e-8));
  }
  CHECK(a.x == b.x);
}

TEST_CASE("AdaGrad-Norm") {
  SUBCASE("3-4-5") {
    OptimizerState<double> s = OptimizerState<double>::initial(Vec{{1.0, 1.0}}, true);
    const auto n = adagrad_norm_step(s, Vec{{3.0, 4.0}}, hp(1.0, 0.0, 0.0));
    CHECK(n.v(0) == 25.0);
    CHECK(n.x(0) == doctest::Approx(0.4));
    CHECK(n.x(1) == doctest::Approx(0.2));
  }
  SUBCASE("zero gradient") {
    auto s = OptimizerState<double>::initial(Vec{{1.0, 2.0}}, true);
    s.v(0) = 3.0;
    const auto n = adagrad_norm_step(s, Vec(Vec::Zero(2)), hp(1.0, 0.0, 1e-8));
    CHECK(n.x == s.x);
    CHECK(n.v == s.v);
    CHECK(n.step == 1);
  }
  SUBCASE("d = 1 matches the coordinate-wise rule") {
    CounterRng rng(3);
    auto a = OptimizerState<double>::initial(Vec::Constant(1, 2.0), true);
    auto b = OptimizerState<double>::initial(Vec::Constant(1, 2.0), false);
    const auto h = hp(0.5, 0.7, 1e-6);
    for (int k = 0; k < 100; ++k) {
      const Vec g = rng.normal_vector(1);
      a = adagrad_norm_step(a, g, h);
      b = adagrad_momentum_step(b, g, h);
    }
    CHECK(a.x(0) == b.x(0));
  }
}

TEST_CASE("SGD") {
  const auto s = OptimizerState<double>::initial(Vec{{1.0, 1.0}});
  const auto n = sgd_step(s, Vec{{1.0, -1.0}}, 0.5);
  CHECK(n.x(0) == 0.5);
  CHECK(n.x(1) == 1.5);
  CHECK(sgd_step(s, Vec(Vec::Zero(2)), 0.5).x == s.x);
  const Vec g{{0.25, -0.5}};
  const auto two = sgd_step(sgd_step(s, g, 0.5), g, 0.5);
  CHECK(two.x(0) == doctest::Approx(1.0 - 2 * 0.5 * 0.25));
  CHECK(two.x(1) == doctest::Approx(1.0 + 2 * 0.5 * 0.5));
  CHECK_THROWS_AS(sgd_step(s, g, 0.0), std::invalid_argument);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(hp(0.0, 0.0, 1e-8).validate(), std::invalid_argument);
  CHECK_THROWS_AS(hp(0.1, 1.0, 1e-8).validate(), std::invalid_argument);
  CHECK_THROWS_AS(hp(0.1, -0.1, 1e-8).validate(), std::invalid_argument);
  CHECK_THROWS_AS(hp(0.1, 0.5, 0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(hp(0.1, 0.5, 1e-8, 0).validate(), std::invalid_argument);
  const auto s = OptimizerState<double>::initial(Vec::Zero(2));
  CHECK_THROWS_AS(adagrad_momentum_step(s, Vec(Vec::Zero(3)), hp(0.1, 0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(adagrad_momentum_step(s, Vec{{NAN, 0.0}}, hp(0.1, 0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(sgd_step(s, Vec{{INFINITY, 0.0}}, 0.1), std::invalid_argument);
  CHECK(parse_method("adagrad-m") == Method::AdagradMomentum);
  CHECK(to_string(Method::AdagradNorm) == "adagrad-norm");
  CHECK_THROWS_AS(parse_method("adam"), std::invalid_argument);
}

TEST_CASE("trajectories are deterministic and complete") {
  const auto p = make_quadratic(10, 2.0, Vec::Zero(10));
  const SyntheticA3Oracle oracle(NoiseSpec{1, 1, 1});
  const auto h = hp(0.1, 0.9, 1e-8, 300);
  const auto a = run_trajectory(p, oracle, Method::AdagradMomentum, h, 5);
  const auto b = run_trajectory(p, oracle, Method::AdagradMomentum, h, 5);
  CHECK(a.x == b.x);
  CHECK(a.g == b.g);
  CHECK(a.f == b.f);
  CHECK(a.steps == 300);
  CHECK(a.g.cols() == 300);
  CHECK(a.x.cols() == 301);
  CHECK(a.complete());
  const auto c = run_trajectory(p, oracle, Method::AdagradMomentum, h, 6);
  CHECK(c.x != a.x);
  // Different master seed, different stream.
  RunOptions ro;
  ro.master_seed = 1;
  CHECK(run_trajectory(p, oracle, Method::AdagradMomentum, h, 5, ro).x != a.x);
}

TEST_CASE("noiseless descent on a quadratic") {
  const auto p = make_quadratic(10, 2.0, Vec::Zero(10));
  const NoiselessOracle oracle;
  const auto t = run_trajectory(p, oracle, Method::Adagrad, hp(0.1, 0.0, 1e-8, 1000), 0);
  CHECK(t.f(1000) < t.f(0));
}

TEST_CASE("v is monotone and the momentum stays bounded") {
  const auto p = make_quartic_gs(4);
  const SyntheticA3Oracle oracle(NoiseSpec{2, 0.5, 1});
  const auto h = hp(0.05, 0.8, 1e-8, 400);
  const auto t = run_trajectory(p, oracle, Method::AdagradMomentum, h, 11);
  for (Eigen::Index s = 1; s < t.v.cols(); ++s) CHECK((t.v.col(s).array() >= t.v.col(s - 1).array()).all());
  const double cap = h.eta * 2.0 / (1.0 - h.beta);
  CHECK(t.m.colwise().norm().maxCoeff() <= cap * (1 + 1e-12));
}

TEST_CASE("run_summary follows the same path") {
  const auto p = make_quadratic(6, 1.5, Vec::Zero(6));
  const SyntheticA3Oracle oracle(NoiseSpec{0.5, 0.1, 0.3});
  const auto h = hp(0.2, 0.5, 1e-8, 250);
  const auto full = run_trajectory(p, oracle, Method::AdagradMomentum, h, 9);
  const auto sum = run_summary(p, oracle, Method::AdagradMomentum, h, 9, 32);
  CHECK(sum.x_final == full.x.col(250));
  REQUIRE(sum.step.front() == 1);
  for (std::size_t i = 0; i < sum.step.size(); ++i)
    CHECK(sum.f[i] == full.f(static_cast<Eigen::Index>(sum.step[i] - 1)));
  CHECK(sum.step.back() == 251);
}

TEST_CASE("divergence truncates the record") {
  const auto p = make_quartic_gs(2);
  const NoiselessOracle oracle;
  const auto t = run_trajectory(p, oracle, Method::Sgd, hp(10.0, 0.0, 1e-8, 100), 0);
  CHECK(t.diverged);
  CHECK(t.steps < 100);
  CHECK_FALSE(t.complete());
  CHECK(t.x.cols() == static_cast<Eigen::Index>(t.steps) + 1);
  CHECK(t.x.allFinite());
}

TEST_CASE("y-sequence") {
  const auto p = make_quadratic(10, 2.0, Vec::Zero(10));
  const SyntheticA3Oracle oracle(NoiseSpec{1, 1, 1});
  SUBCASE("beta = 0 gives y = x") {
    const auto t = run_trajectory(p, oracle, Method::AdagradMomentum, hp(0.1, 0.0, 1e-8, 50), 1);
    const auto y = derive_y_sequence(t);
    CHECK(y.y == t.x);
  }
  SUBCASE("beta = 0.9, T = 500") {
    const auto t = run_trajectory(p, oracle, Method::AdagradMomentum, hp(0.1, 0.9, 1e-8, 500), 2);
    const auto y = derive_y_sequence(t);
    CHECK(y.y.col(0) == t.x.col(0));
    CHECK(y.max_residual < 1e-10);
    // Independent evaluation of the recursion from the record.
    double worst = 0.0;
    for (Eigen::Index s = 0; s < 500; ++s) {
      const Vec step = 0.1 / (1.0 - 0.9) * t.g.col(s).cwiseQuotient(t.b.col(s));
      worst = std::max(worst, (y.y.col(s + 1) - (y.y.col(s) - step)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-10);
  }
  SUBCASE("a corrupted record is caught") {
    auto t = run_trajectory(p, oracle, Method::AdagradMomentum, hp(0.1, 0.9, 1e-8, 50), 3);
    t.x(0, 20) += 1e-3;
    CHECK_THROWS_AS(derive_y_sequence(t), std::logic_error);
  }
}

TEST_CASE("heavy-ball form") {
  // x_{s+1} = x_s - eta g_s / b_s + beta (x_s - x_{s-1}) with x_0 = x_1.
  const auto p = make_quadratic(10, 2.0, Vec::Zero(10));
  const SyntheticA3Oracle oracle(NoiseSpec{0.2, 0.1, 0.5});
  for (double beta : {0.0, 0.5, 0.9}) {
    const auto h = hp(0.05, beta, 1e-8, 1000);
    const auto t = run_trajectory(p, oracle, Method::AdagradMomentum, h, 4);
    Vec prev = t.x.col(0), cur = t.x.col(0), v = Vec::Zero(10);
    double worst = 0.0;
    for (Eigen::Index s = 0; s < 1000; ++s) {
      const Vec g = t.g.col(s);
      v += g.cwiseAbs2();
      const Vec next = cur - h.eta * g.cwiseQuotient((v.cwiseSqrt().array() + h.epsilon).matrix()) + beta * (cur - prev);
      prev = cur;
      cur = next;
      worst = std::max(worst, (cur - t.x.col(s + 1)).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-12);
  }
}
