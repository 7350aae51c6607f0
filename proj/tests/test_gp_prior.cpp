// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "unmix/gp_prior.hpp"
#include "unmix/rng.hpp"

using namespace unmix;

TEST_CASE("se kernel diagonal and off-diagonal values") {
  std::vector<double> grid{0.0, 1.0, 2.5};
  Tensor k = se_kernel_matrix(grid, 1.0);
  CHECK(k.at(0, 0) == 1.0);
  CHECK(k.at(1, 1) == 1.0);
  CHECK(k.at(2, 2) == 1.0);
  CHECK(k.at(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(k.at(1, 0) == k.at(0, 1));
}

TEST_CASE("se kernel underflows to zero at tiny length scale") {
  Tensor k = se_kernel_matrix({0.0, 1.0}, 0.01);
  CHECK(k.at(0, 1) == 0.0);  // exp(-5000) underflows
}

TEST_CASE("se kernel rejects non-positive length scale") {
  CHECK_THROWS_AS(se_kernel_matrix({0.0, 1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(se_kernel_matrix({0.0, 1.0}, -1.0), std::invalid_argument);
}

TEST_CASE("cholesky of identity") {
  Tensor eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto result = cholesky_with_jitter(eye, 1e-8);
  CHECK(result.jitter_used == 1e-8);
  CHECK(result.lower.at(0, 0) == doctest::Approx(std::sqrt(1.0 + 1e-8)).epsilon(1e-15));
  CHECK(result.lower.at(1, 0) == 0.0);
}

TEST_CASE("cholesky closed form 2x2") {
  Tensor k = Tensor::matrix(2, 2, {1.0, 0.5, 0.5, 1.0});
  auto result = cholesky_with_jitter(k, 1e-12);
  CHECK(result.lower.at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(result.lower.at(1, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(result.lower.at(1, 1) == doctest::Approx(0.86603).epsilon(1e-5));
}

TEST_CASE("rank-deficient matrix succeeds with escalated jitter") {
  Tensor k = Tensor::matrix(2, 2, {1, 1, 1, 1});
  auto result = cholesky_with_jitter(k, 1e-16);
  CHECK(result.jitter_used > 1e-16);  // escalated past the base
  // Verify L L^T = K + jI by direct multiplication.
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < 2; ++l) s += result.lower.at(i, l) * result.lower.at(j, l);
      double expected = k.at(i, j) + (i == j ? result.jitter_used : 0.0);
      CHECK(s == doctest::Approx(expected).epsilon(1e-10));
      CHECK(std::isfinite(result.lower.at(i, j)));
    }
}

TEST_CASE("cholesky rejects asymmetric input") {
  Tensor k = Tensor::matrix(2, 2, {1, 0.5, 0.4, 1});
  CHECK_THROWS_AS(cholesky_with_jitter(k, 1e-8), std::invalid_argument);
}

TEST_CASE("cholesky reconstruction accuracy on SE kernels") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t t = 2 + rng.below(30);
    auto grid = default_time_grid(t);
    Tensor k = se_kernel_matrix(grid, rng.uniform(0.02, 0.5));
    auto result = cholesky_with_jitter(k, 1e-8);
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l <= std::min(i, j); ++l)
          s += result.lower.at(i, l) * result.lower.at(j, l);
        double target = k.at(i, j) + (i == j ? result.jitter_used : 0.0);
        err += (s - target) * (s - target);
        norm += k.at(i, j) * k.at(i, j);
      }
    CHECK(std::sqrt(err / norm) < 1e-10);
  }
}

TEST_CASE("kl is zero for identical distributions") {
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  CHECK(std::fabs(kl_gaussian_vs_gp_value({0.0, 0.0}, 1.0, eye, 1e-12)) < 1e-10);
}

TEST_CASE("kl closed-form spot values at T=1") {
  Tensor one = Tensor::matrix(1, 1, {1.0});
  CHECK(kl_gaussian_vs_gp_value({1.0}, 1.0, one, 1e-14) ==
        doctest::Approx(0.5).epsilon(1e-9));
  CHECK(kl_gaussian_vs_gp_value({0.0}, 2.0, one, 1e-14) ==
        doctest::Approx(0.5 * (2.0 - 1.0 - std::log(2.0))).epsilon(1e-9));
}

TEST_CASE("kl rejects non-positive variance") {
  Tensor one = Tensor::matrix(1, 1, {1.0});
  CHECK_THROWS_AS(kl_gaussian_vs_gp_value({0.0}, 0.0, one, 1e-12), std::invalid_argument);
}

TEST_CASE("kl non-negative on 1000 random instances") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t t = 1 + rng.below(50);
    auto grid = default_time_grid(t);
    Tensor k = se_kernel_matrix(grid, rng.uniform(0.02, 1.0));
    std::vector<double> mu(t);
    for (double& x : mu) x = rng.normal();
    double var = std::exp(rng.uniform(-4.0, 2.0));
    CHECK(kl_gaussian_vs_gp_value(mu, var, k, 1e-8) >= -1e-8);
  }
}

TEST_CASE("kl node agrees with the plain-value route") {
  auto grid = default_time_grid(6);
  Rng rng(3);
  std::vector<double> mu_vals(6);
  for (double& x : mu_vals) x = rng.normal();
  const double gamma = 0.17, var = 0.6;
  Var mu = leaf(Tensor({6}, mu_vals));
  Var lv = leaf(Tensor::scalar(std::log(var)));
  Var ll = leaf(Tensor::scalar(std::log(gamma)));
  Var node = kl_gaussian_vs_gp(mu, lv, ll, grid, 1e-8);
  Tensor k = se_kernel_matrix(grid, gamma);
  CHECK(scalar_value(node) ==
        doctest::Approx(kl_gaussian_vs_gp_value(mu_vals, var, k, 1e-8)).epsilon(1e-9));
}

TEST_CASE("kl gradients match finite differences") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t t = 2 + rng.below(19);
    auto grid = default_time_grid(t);
    std::vector<double> mu_vals(t);
    for (double& x : mu_vals) x = 0.5 * rng.normal();
    Var mu = leaf(Tensor({t}, mu_vals));
    Var lv = leaf(Tensor::scalar(rng.uniform(-2.0, 0.5)));
    Var ll = leaf(Tensor::scalar(rng.uniform(std::log(0.05), std::log(0.5))));
    // jitter 1e-6 keeps K well enough conditioned for double-precision
    // central differences; the analytic rule itself is jitter-agnostic
    auto f = [&] { return kl_gaussian_vs_gp(mu, lv, ll, grid, 1e-6); };
    auto report = grad_check(f, {mu, lv, ll}, 1e-6);
    CHECK_MESSAGE(report.max_rel_error < 1e-4,
                  "trial " << trial << " analytic=" << report.analytic
                           << " numeric=" << report.numeric);
  }
}

TEST_CASE("ee penalty direct substitution") {
  // beta=(1,1,1), Gamma=(1,3), var=(0.5,0.5): 1/4 + 4 + 1 (up to the pair floor)
  std::vector<Var> lls{leaf(Tensor::scalar(std::log(1.0))),
                       leaf(Tensor::scalar(std::log(3.0)))};
  std::vector<Var> lvs{leaf(Tensor::scalar(std::log(0.5))),
                       leaf(Tensor::scalar(std::log(0.5)))};
  Var p = ee_penalty(lls, lvs, {1.0, 1.0, 1.0});
  CHECK(scalar_value(p) == doctest::Approx(5.25).epsilon(1e-6));
}

TEST_CASE("ee penalty zero weights give zero") {
  std::vector<Var> lls{leaf(Tensor::scalar(0.0)), leaf(Tensor::scalar(1.0))};
  std::vector<Var> lvs{leaf(Tensor::scalar(0.0)), leaf(Tensor::scalar(0.0))};
  CHECK(scalar_value(ee_penalty(lls, lvs, {0.0, 0.0, 0.0})) == 0.0);
}

TEST_CASE("ee pair floor bounds the repulsion at equal length scales") {
  std::vector<Var> lls{leaf(Tensor::scalar(0.0)), leaf(Tensor::scalar(0.0))};
  std::vector<Var> lvs{leaf(Tensor::scalar(0.0)), leaf(Tensor::scalar(0.0))};
  Var p = ee_penalty(lls, lvs, {1.0, 0.0, 0.0});
  CHECK(scalar_value(p) == doctest::Approx(1e6).epsilon(1e-9));
}

TEST_CASE("ee repulsion strictly decreases as length scales separate") {
  double prev = 1e300;
  for (double gap : {0.1, 0.2, 0.5, 1.0, 2.0}) {
    std::vector<Var> lls{leaf(Tensor::scalar(std::log(1.0))),
                         leaf(Tensor::scalar(std::log(1.0 + gap)))};
    std::vector<Var> lvs{leaf(Tensor::scalar(0.0)), leaf(Tensor::scalar(0.0))};
    double v = scalar_value(ee_penalty(lls, lvs, {1.0, 0.0, 0.0}));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("ee penalty differentiable in length scales and variances") {
  std::vector<Var> lls{leaf(Tensor::scalar(std::log(0.2))),
                       leaf(Tensor::scalar(std::log(0.09)))};
  std::vector<Var> lvs{leaf(Tensor::scalar(-1.0)), leaf(Tensor::scalar(-2.0))};
  auto f = [&] { return ee_penalty(lls, lvs, {1e-3, 0.5, 0.5}); };
  auto report = grad_check(f, {lls[0], lls[1], lvs[0], lvs[1]}, 1e-6);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("prior set caches positive length scales") {
  auto set = GPPriorSet::create(10, {0.25, 0.1, 0.04});
  CHECK(set.dims() == 3);
  CHECK(set.length_scale(1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(GPPriorSet::create(10, {0.25, -0.1}), std::invalid_argument);
}
