#include <doctest.h>

#include <Eigen/Dense>

#include "support/corpus.hpp"
#include "zrdiff/zrp.hpp"

using namespace zrdiff;

TEST_CASE("default family values and the exact tail condition") {
  const auto chain = corpus::complete3();
  const auto g = default_rates(chain);
  CHECK(g.rate(0, 1) == doctest::Approx(2.0 / 3).epsilon(1e-14));  // m(1+b)
  for (int i = 0; i < 3; ++i) CHECK(g.rate(i, 0) == 0.0);
  // the identity is exact; in floats the cancellation noise grows like n eps
  for (long n : {1L, 2L, 7L, 1000L, 123456L})
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(g.condition_residual(i, n)) <
            1e-13 + static_cast<double>(n) * 1e-15);
}

TEST_CASE("table family uses the table below and the formula above") {
  const auto chain = corpus::complete3();
  // g_i(n) = m_i (1 + b/n)(1 + 1/(2 n^2)) for tabled n: residual -> 0
  std::vector<std::vector<double>> table(3);
  for (int i = 0; i < 3; ++i)
    for (long n = 1; n <= 4; ++n)
      table[static_cast<std::size_t>(i)].push_back(
          chain.m(i) * (1.0 + 1.0 / n) * (1.0 + 0.5 / (n * n)));
  const auto g = table_rates(chain, table);
  CHECK(g.rate(0, 2) == doctest::Approx(table[0][1]).epsilon(1e-14));
  CHECK(g.rate(0, 9) == doctest::Approx(chain.m(0) * (1.0 + 1.0 / 9)).epsilon(1e-14));
  // tail residuals at the supplied n shrink toward the limit
  CHECK(std::abs(g.condition_residual(0, 4)) <
        std::abs(g.condition_residual(0, 1)));
  CHECK(std::abs(g.condition_residual(0, 1000)) < 1e-12);

  std::vector<std::vector<double>> bad(3, {0.0});
  CHECK_THROWS_AS(table_rates(chain, bad), Error);
}

TEST_CASE("embedding") {
  Eigen::VectorXi eta(3);
  eta << 2, 1, 1;
  const Eigen::VectorXd x = embed(make_state(eta));
  CHECK(x(0) == 0.5);
  CHECK(x(1) == 0.25);
  CHECK(x(2) == 0.25);

  Eigen::VectorXi corner(3);
  corner << 0, 7, 0;
  const Eigen::VectorXd e = embed(make_state(corner));
  CHECK(e(1) == 1.0);
  CHECK(e.sum() == 1.0);
}

TEST_CASE("largest-remainder start state") {
  Eigen::Vector3d x0(1.0 / 3, 1.0 / 3, 1.0 / 3);
  const ZrpState s = state_from_point(x0, 100);
  CHECK(s.eta.sum() == 100);
  CHECK(s.eta.minCoeff() >= 33);
  CHECK(s.eta.maxCoeff() <= 34);
  CHECK_THROWS_AS(state_from_point(x0, 0), EmptyConfig);
}

TEST_CASE("deterministic replay and conservation") {
  const auto chain = corpus::asymmetric4();
  const auto g = default_rates(chain);
  const ZrpState eta0 =
      state_from_point(Eigen::VectorXd::Constant(4, 0.25), 40);
  Eigen::VectorXd grid(5);
  grid << 0.0, 0.05, 0.1, 0.15, 0.2;
  const ZrpPath a = simulate_zrp(chain, g, eta0, grid, 42, 3);
  const ZrpPath b = simulate_zrp(chain, g, eta0, grid, 42, 3);
  CHECK(a.events == b.events);
  CHECK((a.points - b.points).lpNorm<Eigen::Infinity>() == 0.0);

  const ZrpPath c = simulate_zrp(chain, g, eta0, grid, 42, 4);
  CHECK((a.points - c.points).lpNorm<Eigen::Infinity>() > 0.0);

  for (int s = 0; s < grid.size(); ++s) {
    CHECK(a.points.row(s).sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(a.points.row(s).minCoeff() >= 0.0);
    // coordinates are multiples of 1/N
    for (int i = 0; i < 4; ++i) {
      const double scaled = a.points(s, i) * 40.0;
      CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
    }
  }
}

TEST_CASE("initial embedding and point mass at a single site") {
  const auto chain = corpus::complete3();
  const auto g = default_rates(chain);
  Eigen::VectorXi eta(3);
  eta << 0, 25, 0;
  Eigen::VectorXd grid(1);
  grid << 0.0;
  const ZrpPath path = simulate_zrp(chain, g, make_state(eta), grid, 7);
  CHECK(path.points(0, 0) == 0.0);
  CHECK(path.points(0, 1) == 1.0);
  CHECK(path.points(0, 2) == 0.0);
}

TEST_CASE("event count within the coarse envelope") {
  const auto chain = corpus::complete3();
  const auto g = default_rates(chain);
  const long n = 100;
  const double horizon = 0.2;
  const ZrpState eta0 = state_from_point(Eigen::VectorXd::Constant(3, 1.0 / 3), n);
  Eigen::VectorXd grid(2);
  grid << 0.0, horizon;
  const ZrpPath path = simulate_zrp(chain, g, eta0, grid, 11);
  // mean emission rate ~ sum_i m_i lambda_i = 2, so about N^2 T * 2 events
  const double expected = static_cast<double>(n) * n * horizon * 2.0;
  CHECK(static_cast<double>(path.events) > expected / 10.0);
  CHECK(static_cast<double>(path.events) < expected * 10.0);
}

TEST_CASE("single particle performs the g(1)-modified walk") {
  // One particle on the two-site chain r(1,2)=2, r(2,1)=1 walks with rates
  // q(i,j) = g_i(1) r(i,j) = m_i (1+b) r(i,j); its occupation fractions
  // follow the stationary state of q, computed independently below.
  Eigen::MatrixXd rates(2, 2);
  rates << 0, 2, 1, 0;
  const auto chain = build_chain<double>(rates, 1.0);
  const auto g = default_rates(chain);

  Eigen::MatrixXd walk(2, 2);
  walk << 0, g.rate(0, 1) * chain.rates(0, 1), g.rate(1, 1) * chain.rates(1, 0), 0;
  const Eigen::VectorXd pi = stationary_state(walk);

  const int replicas = 200;
  const double horizon = 40.0;  // chain time: N = 1 so N^2 = 1
  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(801, 0.0, horizon);
  Eigen::VectorXi eta(2);
  eta << 1, 0;

  std::vector<double> occupation(static_cast<std::size_t>(replicas));
  for (int r = 0; r < replicas; ++r) {
    const ZrpPath path =
        simulate_zrp(chain, g, make_state(eta), grid, 314, static_cast<std::uint64_t>(r));
    occupation[static_cast<std::size_t>(r)] = path.points.col(0).mean();
  }
  double mean = 0.0;
  for (double v : occupation) mean += v;
  mean /= replicas;
  double var = 0.0;
  for (double v : occupation) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (replicas - 1) / replicas);
  CHECK(std::abs(mean - pi(0)) < 3.0 * se);

  // symmetric two-site chain: the walk state equals the chain state
  Eigen::MatrixXd sym(2, 2);
  sym << 0, 1, 1, 0;
  const auto schain = build_chain<double>(sym, 1.0);
  Eigen::MatrixXd swalk(2, 2);
  swalk << 0, schain.m(0) * 2.0, schain.m(1) * 2.0, 0;
  CHECK(stationary_state(swalk)(0) ==
        doctest::Approx(schain.m(0)).epsilon(1e-12));
}

TEST_CASE("error paths") {
  const auto chain = corpus::complete3();
  const auto g = default_rates(chain);
  Eigen::VectorXi empty = Eigen::VectorXi::Zero(3);
  CHECK_THROWS_AS(make_state(empty), EmptyConfig);

  Eigen::VectorXi eta(3);
  eta << 10, 10, 10;
  Eigen::VectorXd grid(2);
  grid << 0.0, 1.0;
  CHECK_THROWS_AS(simulate_zrp(chain, g, make_state(eta), grid, 1, 0, 10),
                  HorizonOverflow);
}
