#include <doctest.h>

#include <Eigen/Dense>

#include "support/corpus.hpp"
#include "zrdiff/chain.hpp"

using namespace zrdiff;

namespace {

ChainModel<double> two_site() {
  Eigen::MatrixXd rates(2, 2);
  rates << 0, 2, 1, 0;
  return build_chain<double>(rates, 1.0);
}

}  // namespace

TEST_CASE("two-site stationary state by detailed balance") {
  const auto chain = two_site();
  CHECK(chain.m(0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(chain.m(1) == doctest::Approx(2.0 / 3).epsilon(1e-14));
}

TEST_CASE("complete three-site chain has the uniform state") {
  const auto chain = corpus::complete3();
  for (int i = 0; i < 3; ++i)
    CHECK(chain.m(i) == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("drift vectors and the stationarity identity") {
  const auto chain = two_site();
  CHECK(chain.drift(0, 0) == -2.0);
  CHECK(chain.drift(0, 1) == 2.0);
  CHECK(chain.drift(1, 0) == 1.0);
  CHECK(chain.drift(1, 1) == -1.0);
  const Eigen::VectorXd mix =
      chain.m(0) * chain.drift.row(0) + chain.m(1) * chain.drift.row(1);
  CHECK(mix.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("build_chain rejects bad input") {
  Eigen::MatrixXd diag(2, 2);
  diag << 0.5, 1, 1, 0;
  CHECK_THROWS_AS(build_chain<double>(diag, 1.0), NonzeroDiagonal);

  Eigen::MatrixXd disconnected = Eigen::MatrixXd::Zero(3, 3);
  disconnected(0, 1) = 1.0;
  disconnected(1, 0) = 1.0;  // site 2 unreachable
  CHECK_THROWS_AS(build_chain<double>(disconnected, 1.0), NotIrreducible);

  Eigen::MatrixXd ok(2, 2);
  ok << 0, 1, 1, 0;
  CHECK_THROWS_AS(build_chain<double>(ok, 0.5), BadB);

  Eigen::MatrixXd negative(2, 2);
  negative << 0, -1, 1, 0;
  CHECK_THROWS_AS(build_chain<double>(negative, 1.0), Error);
}

TEST_CASE("adjoint of a reversible chain is itself") {
  const auto chain = corpus::complete3();
  const auto adj = adjoint(chain);
  CHECK((adj.rates - chain.rates).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("adjoint rate by hand and adjoint invariants") {
  const auto chain = two_site();
  const auto adj = adjoint(chain);
  // r'(1,2) = m_2 r(2,1) / m_1 = (2/3 * 1) / (1/3) = 2
  CHECK(adj.rates(0, 1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK((adj.m - chain.m).lpNorm<Eigen::Infinity>() < 1e-12);
  const auto twice = adjoint(adj);
  CHECK((twice.rates - chain.rates).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("generator application") {
  const auto chain = corpus::complete3();
  const Eigen::VectorXd constant = Eigen::VectorXd::Constant(3, 4.2);
  CHECK(generator_apply(chain, constant).lpNorm<Eigen::Infinity>() < 1e-14);

  Eigen::VectorXd indicator(3);
  indicator << 1, 0, 0;
  const Eigen::VectorXd lf = generator_apply(chain, indicator);
  CHECK(lf(0) == doctest::Approx(-2.0));
  CHECK(lf(1) == doctest::Approx(1.0));
  CHECK(lf(2) == doctest::Approx(1.0));
}

TEST_CASE("indicator columns recover the rates") {
  const auto chain = corpus::asymmetric4();
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(4);
    indicator(i) = 1.0;
    const Eigen::VectorXd lf = generator_apply(chain, indicator);
    for (int j = 0; j < 4; ++j)
      if (j != i) CHECK(lf(j) == doctest::Approx(chain.rates(j, i)).epsilon(1e-14));
  }
}

TEST_CASE("corpus chains satisfy the exact algebra") {
  for (const auto& chain : corpus::chains()) {
    const int p = chain.sites();
    // stationarity residual m^T Q = 0
    CHECK((chain.drift.transpose() * chain.m).lpNorm<Eigen::Infinity>() < 1e-12);
    // tangency: every drift vector sums to zero
    CHECK(chain.drift.rowwise().sum().lpNorm<Eigen::Infinity>() < 1e-12);
    // mixture identity sum_i m_i v_i = 0
    CHECK((chain.drift.transpose() * chain.m).lpNorm<Eigen::Infinity>() < 1e-12);
    // a rows sum to zero
    CHECK(chain.a.rowwise().sum().lpNorm<Eigen::Infinity>() < 1e-12);
    // any p-1 drift vectors are linearly independent
    for (int drop = 0; drop < p; ++drop) {
      Eigen::MatrixXd rest(p - 1, p);
      int row = 0;
      for (int i = 0; i < p; ++i)
        if (i != drop) rest.row(row++) = chain.drift.row(i);
      CHECK(rest.colPivHouseholderQr().rank() == p - 1);
    }
  }
}

TEST_CASE("the algebra also holds in long double") {
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> rates(3, 3);
  rates << 0.0L, 1.5L, 0.25L,
           2.0L, 0.0L, 1.0L,
           0.5L, 0.75L, 0.0L;
  const auto chain = build_chain<long double>(rates, 1.0L);
  CHECK(static_cast<double>(
            (chain.drift.transpose() * chain.m).template lpNorm<Eigen::Infinity>()) <
        1e-15);
  const auto adj = adjoint(chain);
  const auto twice = adjoint(adj);
  CHECK(static_cast<double>(
            (twice.rates - chain.rates).template lpNorm<Eigen::Infinity>()) < 1e-15);
}
