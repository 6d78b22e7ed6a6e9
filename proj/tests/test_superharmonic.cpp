#include <doctest.h>

#include <Eigen/Dense>

#include "support/corpus.hpp"
#include "support/fd_oracle.hpp"
#include "zrdiff/superharmonic.hpp"

using namespace zrdiff;

TEST_CASE("profile and F_A worked values") {
  // f(1/4) with b=1, gamma=1/2: (1/16)(1 - 1/2) = 1/32
  CHECK(supharm_profile(0.25, 1.0, 0.5) == doctest::Approx(1.0 / 32).epsilon(1e-14));
  CHECK(supharm_profile(0.0, 1.0, 0.5) == 0.0);
  CHECK(supharm_profile(1.0, 1.0, 0.5) == 0.0);

  SupharmSpec spec;
  spec.block = {2};
  Eigen::Vector3d x(0.5, 0.25, 0.25);
  CHECK(eval_FA(spec, x) == doctest::Approx(1.0 / 32).epsilon(1e-14));

  Eigen::Vector3d dead(0.5, 0.5, 0.0);
  CHECK(eval_FA(spec, dead) == 0.0);

  CounterRng rng(12, 0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd y = corpus::interior_point(3, rng);
    CHECK(eval_FA(spec, y) >= 0.0);
  }
}

TEST_CASE("block outside the face gives zero") {
  const auto chain = corpus::complete3();
  SupharmSpec spec;
  spec.block = {2};
  const auto face = trace_process(chain, {0, 1});
  Eigen::Vector3d x(0.4, 0.6, 0.0);
  CHECK(eval_generator_FA(spec, chain, face, x) == 0.0);
}

TEST_CASE("vanishing of F_A and its generator on the complementary face") {
  const auto chain = corpus::asymmetric4();
  SupharmSpec spec;
  spec.block = {2, 3};
  // B = S \ A = {0, 1}: F_A and L F_A vanish identically there
  const auto face = trace_process(chain, {0, 1});
  CounterRng rng(3, 0);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
    const Eigen::VectorXd w = corpus::interior_point(2, rng);
    x(0) = w(0);
    x(1) = w(1);
    CHECK(eval_FA(spec, x) == 0.0);
    CHECK(eval_generator_FA(spec, chain, face, x) == 0.0);
  }
}

TEST_CASE("closed form agrees with the finite-difference oracle") {
  CounterRng rng(77, 0);
  std::vector<ChainModel<double>> chains{corpus::complete3(),
                                         corpus::asymmetric4()};
  for (const auto& c : corpus::chains())
    if (c.sites() == 5) {
      chains.push_back(c);
      break;
    }
  for (const auto& chain : chains) {
    const int p = chain.sites();
    for (FaceMask amask : enumerate_faces(p, 1)) {
      if (face_size(amask) > p - 2) continue;  // leave room for |C| >= 2
      SupharmSpec spec;
      spec.block = face_sites(amask);
      spec.b = chain.b;
      for (FaceMask cmask : enumerate_faces(p, 2)) {
        if (!face_subset(amask, cmask)) continue;
        const auto face = trace_process(chain, face_sites(cmask));
        for (int rep = 0; rep < 2; ++rep) {
          Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
          const Eigen::VectorXd w = corpus::interior_point(
              face_size(cmask), rng, 0.05);
          for (std::size_t k = 0; k < face.face.size(); ++k)
            x(face.face[k]) = w(static_cast<int>(k));
          const double analytic = eval_generator_FA(spec, chain, face, x);
          const double fd = oracle::generator_FA_fd(spec, chain, face, x);
          CHECK(std::abs(analytic - fd) <=
                1e-6 * std::max(1.0, std::abs(analytic)));
        }
      }
    }
  }
}

TEST_CASE("lambda recipe worked values") {
  const auto chain = corpus::complete3();
  SupharmSpec spec;
  spec.block = {2};
  const SupharmRegion region = find_lambda(spec, chain, {0, 1}, 0.2);
  CHECK(!region.empty);
  // both trace faces give the same ratio here: M = 1.6
  CHECK(region.M == doctest::Approx(1.6).epsilon(1e-12));
  // (gamma+1) lambda^gamma <= 1 gives lambda <= 4/9;
  // M lambda^(1-gamma) <= eps gives lambda <= (eps/M)^2 = 1/64
  const double from_eps = std::pow(0.2 / region.M, 2.0);
  CHECK(region.lambda == doctest::Approx(std::min(from_eps, 4.0 / 9)).epsilon(1e-12));
  CHECK(region.lambda == doctest::Approx(from_eps).epsilon(1e-12));

  // with gamma near 1 and a generous eps the gamma constraint binds
  SupharmSpec steep = spec;
  steep.gamma = 0.9;
  const SupharmRegion wide = find_lambda(steep, chain, {0}, 0.75);
  const double eps_bound = std::pow(0.75 / wide.M, 1.0 / 0.1);
  const double gamma_bound = std::pow(1.0 / 1.9, 1.0 / 0.9);
  CHECK(gamma_bound < eps_bound);
  CHECK(wide.lambda == doctest::Approx(std::min(eps_bound, gamma_bound))
                           .epsilon(1e-12));
  CHECK(wide.lambda == doctest::Approx(gamma_bound).epsilon(1e-12));

  // infeasible epsilon floor
  const SupharmRegion bad = find_lambda(spec, chain, {0, 1}, 0.6);
  CHECK(bad.empty);
}

TEST_CASE("sign contract on the worked three-site region") {
  const auto chain = corpus::complete3();
  SupharmSpec spec;
  spec.block = {2};
  const SupharmReport report = verify_supharmonic(spec, chain, {0, 1}, 0.2);
  CHECK(!report.empty_region);
  CHECK(report.points > 0);
  CHECK(report.pass(1e-10));
  CHECK(report.max_value <= 1e-10);
}

TEST_CASE("sign contract on a four-site chain with a two-site block") {
  const auto chain = corpus::asymmetric4();
  SupharmSpec spec;
  spec.block = {2, 3};
  const SupharmReport report = verify_supharmonic(spec, chain, {0, 1}, 0.2, 9);
  CHECK(!report.empty_region);
  CHECK(report.points > 0);
  CHECK(report.pass(1e-10));
}

TEST_CASE("empty region propagates as a report, not a failure") {
  const auto chain = corpus::complete3();
  SupharmSpec spec;
  spec.block = {2};
  const SupharmReport report = verify_supharmonic(spec, chain, {0, 1}, 0.6);
  CHECK(report.empty_region);
  CHECK(report.pass(1e-10));
}

TEST_CASE("degenerate inputs are rejected") {
  const auto chain = corpus::complete3();
  SupharmSpec spec;
  spec.block = {2};
  CHECK_THROWS_AS(find_lambda(spec, chain, {}, 0.2), Error);
  CHECK_THROWS_AS(find_lambda(spec, chain, {2}, 0.2), Error);
  spec.gamma = 1.5;
  CHECK_THROWS_AS(find_lambda(spec, chain, {0, 1}, 0.2), Error);
}
