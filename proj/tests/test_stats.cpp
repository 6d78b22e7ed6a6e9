#include <doctest.h>

#include <Eigen/Dense>

#include "zrdiff/stats.hpp"

using namespace zrdiff;

TEST_CASE("wasserstein on hand-computed three-point samples") {
  // sorted pairing: |0-0.5| + |1-1.5| + |2-3| = 2, divided by 3
  CHECK(std::abs(wasserstein1({0, 1, 2}, {0.5, 1.5, 3}) - 2.0 / 3) < 1e-14);
  // unequal sizes with ties: CDF gap is 2/3 on [0,1)
  CHECK(std::abs(wasserstein1({0, 0, 1}, {1}) - 2.0 / 3) < 1e-14);
  // self distance
  CHECK(wasserstein1({0.3, 0.1, 0.9}, {0.9, 0.3, 0.1}) == 0.0);
  // symmetry
  CHECK(wasserstein1({0, 1}, {2, 5}) == wasserstein1({2, 5}, {0, 1}));
}

TEST_CASE("energy distance basics") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 1, 0, 0, 1;
  CHECK(energy_distance(x, x) == 0.0);
  Eigen::MatrixXd y = x;
  y.array() += 2.0;
  CHECK(energy_distance(x, y) > 1.0);
  CHECK(energy_distance(x, y) == doctest::Approx(energy_distance(y, x)));
}

TEST_CASE("bootstrap interval brackets the estimate and sees zero for equal laws") {
  CounterRng rng(10, 0);
  Eigen::MatrixXd x(300, 1), y(300, 1);
  for (int i = 0; i < 300; ++i) {
    x(i, 0) = rng.gaussian();
    y(i, 0) = rng.gaussian();
  }
  auto stat = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    std::vector<double> av(static_cast<std::size_t>(a.rows()));
    std::vector<double> bv(static_cast<std::size_t>(b.rows()));
    for (int i = 0; i < a.rows(); ++i) av[static_cast<std::size_t>(i)] = a(i, 0);
    for (int i = 0; i < b.rows(); ++i) bv[static_cast<std::size_t>(i)] = b(i, 0);
    return wasserstein1(std::move(av), std::move(bv));
  };
  const BootstrapCi ci = bootstrap_ci_two_sample(x, y, stat, 400, 0.95, 9);
  CHECK(ci.contains(ci.estimate));

  // same law: the distance stays inside the permutation null band at the
  // nominal rate (individual seeds can land in the 5% tail)
  int inside = 0;
  for (int trial = 1; trial <= 10; ++trial) {
    CounterRng trng(10 + trial, 0);
    Eigen::MatrixXd tx(300, 1), ty(300, 1);
    for (int i = 0; i < 300; ++i) {
      tx(i, 0) = trng.gaussian();
      ty(i, 0) = trng.gaussian();
    }
    const double est = stat(tx, ty);
    const double null95 = permutation_null_quantile(
        tx, ty, stat, 200, 0.95, static_cast<std::uint64_t>(9 + trial));
    if (est <= null95) ++inside;
  }
  CHECK(inside >= 8);

  // identical samples: the estimate itself is exactly zero
  const BootstrapCi self = bootstrap_ci_two_sample(x, x, stat, 200, 0.95, 9);
  CHECK(self.estimate == 0.0);
  CHECK(self.contains(0.0));
}

TEST_CASE("bootstrap coverage on synthetic gaussian ensembles") {
  // statistic with known truth: difference of sample means, true value 0
  auto stat = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.col(0).mean() - b.col(0).mean();
  };
  int covered = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    CounterRng rng(500 + trial, 0);
    Eigen::MatrixXd x(100, 1), y(100, 1);
    for (int i = 0; i < 100; ++i) {
      x(i, 0) = rng.gaussian();
      y(i, 0) = rng.gaussian();
    }
    const BootstrapCi ci = bootstrap_ci_two_sample(
        x, y, stat, 200, 0.95, static_cast<std::uint64_t>(trial), 1, 0, false);
    if (ci.contains(0.0)) ++covered;
  }
  CHECK(covered >= 180);  // >= 90% empirical coverage at 95% nominal
}

TEST_CASE("mean interval and quantiles") {
  const MeanCi ci = mean_ci({1.0, 2.0, 3.0, 4.0}, 0.95);
  CHECK(ci.mean == doctest::Approx(2.5));
  CHECK(ci.contains(2.5));
  CHECK(ci.lo < 2.5);
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == doctest::Approx(2.0));
  CHECK(quantile({1.0, 2.0}, 0.25) == doctest::Approx(1.25));
  CHECK_THROWS_AS(mean_ci({1.0}, 0.95), Error);
}
