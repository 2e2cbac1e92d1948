#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "adalab/dataset.hpp"
#include "adalab/problem.hpp"

using namespace adalab;
using Vec = Eigen::VectorXd;

namespace {

std::string temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("adalab_" + name);
  std::ofstream(path) << text;
  return path.string();
}

/// Central differences with step 1e-5 (1 + ||x||).
Vec fd_gradient(const Problem& p, const Vec& x) {
  const double h = 1e-5 * (1.0 + x.norm());
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (p.value(a) - p.value(b)) / (2 * h);
  }
  return g;
}

double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

class ConstantObjective final : public Objective {
 public:
  explicit ConstantObjective(Eigen::Index d) : d_(d) {}
  Eigen::Index dim() const override { return d_; }
  double value(const Vec&) const override { return 3.0; }
  Vec gradient(const Vec&) const override { return Vec::Zero(d_); }

 private:
  Eigen::Index d_;
};

Dataset small_dataset() {
  const auto path = temp_file("small.svm",
                              "+1 1:0.5 3:1\n"
                              "-1 2:1 4:-0.25\n"
                              "+1 1:1 2:1 3:1 4:1\n"
                              "-1 3:2\n"
                              "+1 2:-1.5 4:0.5\n");
  return load_libsvm(path);
}

}  // namespace

TEST_CASE("libsvm parsing") {
  SUBCASE("one line") {
    const auto ds = load_libsvm(temp_file("one.svm", "-1 3:1 11:1\n"));
    CHECK(ds.n() == 1);
    CHECK(ds.d() == 11);
    CHECK(ds.rows.nonZeros() == 2);
    CHECK(ds.rows.coeff(0, 2) == 1.0);
    CHECK(ds.rows.coeff(0, 10) == 1.0);
    CHECK(ds.labels(0) == -1.0);
  }
  SUBCASE("empty file") {
    const auto ds = load_libsvm(temp_file("empty.svm", ""));
    CHECK(ds.n() == 0);
    CHECK(ds.empty());
    CHECK_THROWS(make_reg_logistic(ds, 0.1));
  }
  SUBCASE("malformed lines name their line number") {
    try {
      load_libsvm(temp_file("bad.svm", "+1 1:1\n+1 2:x\n"));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    try {
      load_libsvm(temp_file("order.svm", "+1 1:1\n-1 1:1\n+1 5:1 3:1\n"));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(load_libsvm(temp_file("dup.svm", "+1 2:1 2:1\n")), ParseError);
    CHECK_THROWS_AS(load_libsvm(temp_file("zero.svm", "+1 0:1\n")), ParseError);
    CHECK_THROWS_AS(load_libsvm(temp_file("dim.svm", "+1 7:1\n"), 5), ParseError);
  }
  SUBCASE("dimension override pads columns") {
    const auto ds = load_libsvm(temp_file("pad.svm", "+1 2:1\n"), 123);
    CHECK(ds.d() == 123);
  }
  SUBCASE("a9a training file") {
    REQUIRE(std::filesystem::exists("data/a9a"));
    const auto ds = load_libsvm("data/a9a");
    CHECK(ds.n() == 32561);
    CHECK(ds.d() == 123);
    CHECK(ds.head(100).n() == 100);
  }
}

TEST_CASE("regularized logistic regression") {
  const auto ds = small_dataset();
  SUBCASE("value at zero is log 2") {
    const auto p = make_reg_logistic(ds, 0.1);
    CHECK(p.value(Vec::Zero(4)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK_FALSE(p.f_star().has_value());
    REQUIRE(p.global_L().has_value());
    REQUIRE(p.finite_sum() != nullptr);
  }
  SUBCASE("regularizer gradient at x_j = 1 with lambda = 1") {
    const auto with = make_reg_logistic(ds, 1.0);
    const auto without = make_reg_logistic(ds, 0.0);
    const Vec x = Vec::Ones(4);
    const Vec diff = with.gradient(x) - without.gradient(x);
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(diff(j) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("gradient against finite differences") {
    CounterRng rng(21);
    for (bool fold : {true, false}) {
      const auto p = make_reg_logistic(ds, 0.1, fold);
      for (int k = 0; k < 5; ++k) {
        const Vec x = 2.0 * rng.normal_vector(4);
        CHECK(rel_err(p.gradient(x), fd_gradient(p, x)) < 1e-6);
        const auto [f, g] = p.value_and_gradient(x);
        CHECK(f == p.value(x));
        CHECK(g == p.gradient(x));
      }
    }
  }
  SUBCASE("batch gradients average to the full gradient") {
    const auto p = make_reg_logistic(ds, 0.1);
    const auto* fs = p.finite_sum();
    const Vec x{{0.3, -0.2, 0.1, 0.7}};
    std::vector<int> all{0, 1, 2, 3, 4};
    CHECK(rel_err(fs->batch_gradient(x, all), p.gradient(x)) < 1e-14);
    for (int i = 0; i < 5; ++i) {
      const int idx[] = {i};
      CHECK((fs->batch_gradient(x, idx) - p.gradient(x)).norm() <= fs->deviation_bound());
    }
  }
  SUBCASE("the smoothness constant bounds sampled gradient ratios") {
    const auto p = make_reg_logistic(ds, 0.1);
    CounterRng rng(5);
    for (int k = 0; k < 200; ++k) {
      const Vec x = 3.0 * rng.normal_vector(4), y = 3.0 * rng.normal_vector(4);
      CHECK((p.gradient(x) - p.gradient(y)).norm() <= *p.global_L() * (x - y).norm() * (1 + 1e-12));
    }
  }
}

TEST_CASE("quadratic") {
  const auto p = make_quadratic(2, 2.0, Vec::Zero(2));
  CHECK(p.value(Vec::Zero(2)) == 0.0);
  CHECK(p.gradient(Vec::Zero(2)) == Vec::Zero(2));
  const Vec x = Vec::Ones(2);
  CHECK(p.value(x) == 2.0);
  CHECK(p.gradient(x) == Vec::Constant(2, 2.0));
  CHECK(*p.f_star() == 0.0);
  CHECK(*p.global_L() == 2.0);

  const Vec xs{{1.0, -2.0, 0.5}};
  const auto q = make_quadratic(3, 3.5, xs);
  CounterRng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vec z = rng.normal_vector(3) * 4.0;
    const double g2 = q.gradient(z).squaredNorm();
    CHECK(std::abs(g2 - 2.0 * 3.5 * q.value(z)) <= 1e-13 * std::max(1.0, g2));
    CHECK(rel_err(q.gradient(z), fd_gradient(q, z)) < 1e-6);
    CHECK(q.value(z) - *q.f_star() >= -1e-12);
  }
}

TEST_CASE("quartic") {
  const auto p = make_quartic_gs(3);
  CHECK(p.value(Vec::Zero(3)) == 0.0);
  CHECK(p.gradient(Vec::Zero(3)) == Vec::Zero(3));
  const auto one = make_quartic_gs(1);
  CHECK(one.value(Vec::Constant(1, 2.0)) == 16.0);
  CHECK(one.gradient(Vec::Constant(1, 2.0))(0) == 32.0);
  CounterRng rng(2);
  for (int k = 0; k < 20; ++k) {
    const Vec z = rng.normal_vector(3);
    CHECK(rel_err(p.gradient(z), fd_gradient(p, z)) < 1e-6);
    CHECK(p.value(z) - *p.f_star() >= -1e-12);
  }
  REQUIRE(p.generalized().has_value());
  CHECK(quartic_certificate_holds(p.generalized()->L0, p.generalized()->L1));
  CHECK_FALSE(quartic_certificate_holds(1.0, 1.0));
}

TEST_CASE("smoothness probe") {
  SUBCASE("quadratic: global L from below") {
    const auto p = make_quadratic(5, 2.0, Vec::Zero(5));
    CounterRng rng(3);
    const auto r = smoothness_probe(p, ProbeBox::cube(5, 3.0), 200, rng);
    REQUIRE(r.estimate.has_value());
    REQUIRE(std::holds_alternative<GlobalL>(*r.estimate));
    const double L = std::get<GlobalL>(*r.estimate).L;
    CHECK(L >= 1.9);
    CHECK(L <= 2.0 * (1 + 1e-12));
  }
  SUBCASE("quartic: generalized fit, global ratio grows with the box") {
    const auto p = make_quartic_gs(4);
    CounterRng rng(4);
    const auto r = smoothness_probe(p, ProbeBox::cube(4, 2.0), 500, rng);
    REQUIRE(r.estimate.has_value());
    CHECK(std::holds_alternative<Generalized>(*r.estimate));
    double prev = 0.0;
    // The widest probe pairs reach 2^10 away, so the box has to dominate that.
    for (double w : {1e4, 1e5, 1e6}) {
      CounterRng rr(5);
      const double ratio = smoothness_probe(p, ProbeBox::cube(4, w), 200, rr).max_ratio;
      CHECK(ratio > 10.0 * prev);
      prev = ratio;
    }
  }
  SUBCASE("constant function sits at the grid minimum") {
    const Problem p("constant", std::make_shared<ConstantObjective>(3), Vec::Zero(3));
    CounterRng rng(6);
    const auto r = smoothness_probe(p, ProbeBox::cube(3, 1.0), 100, rng);
    CHECK(r.max_ratio == 0.0);
    REQUIRE(r.grid_fit.has_value());
    CHECK(r.grid_fit->L0 == std::ldexp(1.0, kProbeGridMinExp));
    CHECK(r.grid_fit->L1 == std::ldexp(1.0, kProbeGridMinExp));
  }
  SUBCASE("preconditions") {
    const auto p = make_quadratic(2, 1.0, Vec::Zero(2));
    CounterRng rng(7);
    CHECK_THROWS_AS(smoothness_probe(p, ProbeBox::cube(2, 1.0), 50, rng), std::invalid_argument);
    CHECK_THROWS_AS(smoothness_probe(p, ProbeBox::cube(3, 1.0), 100, rng), std::invalid_argument);
  }
}

TEST_CASE("f* estimation stays below the minimum") {
  const Vec xs{{1.0, 2.0}};
  const auto p = make_quadratic(2, 1.0, xs);
  const double est = estimate_f_star(p, 2000, 0.5);
  CHECK(est <= 0.0);
  CHECK(est > -1e-3);
}

TEST_CASE("problem ids") {
  CHECK(make_problem("quadratic:d=3,L=2").dim() == 3);
  CHECK(make_problem("quartic:d=2").dim() == 2);
  CHECK(make_problem("a9a-reglog:lambda=0.1,subsample=50", "data/a9a").finite_sum()->n() == 50);
  CHECK_THROWS_AS(make_problem("cubic:d=2"), std::invalid_argument);
  CHECK_THROWS_AS(make_problem("quadratic:d=3,M=2"), std::invalid_argument);
  CHECK_THROWS_AS(make_problem("quadratic:d=abc"), std::invalid_argument);
}
