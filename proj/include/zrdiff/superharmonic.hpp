#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "zrdiff/chain.hpp"
#include "zrdiff/errors.hpp"
#include "zrdiff/faces.hpp"
#include "zrdiff/trace.hpp"

namespace zrdiff {

// Scalar profile f(x) = x^(1+b) (1 - x^gamma) and its derivatives;
// f(0) = f(1) = 0 and f >= 0 on [0, 1].
template <class Scalar>
Scalar supharm_profile(Scalar x, Scalar b, Scalar gamma) {
  using std::pow;
  return pow(x, 1 + b) * (1 - pow(x, gamma));
}

template <class Scalar>
Scalar supharm_profile_d1(Scalar x, Scalar b, Scalar gamma) {
  using std::pow;
  return (1 + b) * pow(x, b) - (1 + b + gamma) * pow(x, b + gamma);
}

template <class Scalar>
Scalar supharm_profile_d2(Scalar x, Scalar b, Scalar gamma) {
  using std::pow;
  return b * (1 + b) * pow(x, b - 1) -
         (b + gamma) * (1 + b + gamma) * pow(x, b + gamma - 1);
}

// Family F_A(x) = prod_{k in A} x_k^(1+b) (1 - x_k^gamma) over the
// vanishing block A, with the parameters of the sign lemma.
struct SupharmSpec {
  std::vector<int> block;  // sorted sites of A
  double gamma = 0.5;      // in (0, 1)
  double b = 1.0;          // >= 1

  void validate(int p) const {
    if (block.empty()) throw Error("vanishing block A must be nonempty");
    for (int s : block)
      if (s < 0 || s >= p) throw Error("block site out of range");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must be in (0,1)");
    if (!(b >= 1.0)) throw BadB("b must be >= 1");
  }
};

template <class Derived>
double eval_FA(const SupharmSpec& spec, const Eigen::MatrixBase<Derived>& x) {
  double value = 1.0;
  for (int k : spec.block)
    value *= supharm_profile(static_cast<double>(x(k)), spec.b, spec.gamma);
  return value;
}

// Gradient and Hessian entries of F_A; nonzero only on block coordinates.
inline Eigen::VectorXd grad_FA(const SupharmSpec& spec,
                               const Eigen::VectorXd& x) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (int j : spec.block) {
    double part = supharm_profile_d1(x(j), spec.b, spec.gamma);
    for (int k : spec.block)
      if (k != j) part *= supharm_profile(x(k), spec.b, spec.gamma);
    g(j) = part;
  }
  return g;
}

inline Eigen::MatrixXd hess_FA(const SupharmSpec& spec,
                               const Eigen::VectorXd& x) {
  const int p = static_cast<int>(x.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);
  for (int i : spec.block)
    for (int j : spec.block) {
      double part = (i == j) ? supharm_profile_d2(x(i), spec.b, spec.gamma)
                             : supharm_profile_d1(x(i), spec.b, spec.gamma) *
                                   supharm_profile_d1(x(j), spec.b, spec.gamma);
      for (int k : spec.block)
        if (k != i && k != j) part *= supharm_profile(x(k), spec.b, spec.gamma);
      h(i, j) = part;
    }
  return h;
}

// Face generator applied to F_A at x interior to Sigma_C, in closed form:
//   L^C F_A(x) = sum_{j in A} sum_{i in C} m_i (v^C_i . e_j)
//                  ( b d_j F_A / x_i  -  d_i d_j F_A ).
// Returns 0 when A is not contained in C (F_A vanishes on that face).
inline double eval_generator_FA(const SupharmSpec& spec,
                                const ChainModel<double>& chain,
                                const TraceModel<double>& face,
                                const Eigen::VectorXd& x) {
  spec.validate(chain.sites());
  if (face.face.size() < 2) throw DegenerateFace("face generator needs |C| >= 2");
  const FaceMask amask = face_mask(spec.block);
  if (!face_subset(amask, face.mask)) return 0.0;
  for (int k : spec.block)
    if (x(k) == 0.0) return 0.0;

  const Eigen::VectorXd grad = grad_FA(spec, x);
  const Eigen::MatrixXd hess = hess_FA(spec, x);

  double value = 0.0;
  for (int j : spec.block) {
    for (std::size_t ipos = 0; ipos < face.face.size(); ++ipos) {
      const int i = face.face[ipos];
      const double weight =
          chain.m(i) * face.face_drift(static_cast<int>(ipos), j);
      if (weight == 0.0) continue;
      value += weight * (spec.b * grad(j) / x(i) - hess(i, j));
    }
  }
  return value;
}

// Region of the sign lemma: inside Sigma_{A u D}, block coordinates at
// most lambda, D coordinates at least epsilon. M is the constant of the
// lemma's recipe, maximized over every face A <= C <= A u D (sufficient
// but possibly conservative; the per-face constant could be smaller).
struct SupharmRegion {
  FaceMask domain = 0;  // A u D
  double epsilon = 0.0;
  double lambda = 0.0;
  double M = 0.0;
  bool empty = false;
};

inline SupharmRegion find_lambda(const SupharmSpec& spec,
                                 const ChainModel<double>& chain,
                                 const std::vector<int>& free_block,
                                 double epsilon) {
  spec.validate(chain.sites());
  if (free_block.empty()) throw Error("D must be nonempty");
  const FaceMask amask = face_mask(spec.block);
  const FaceMask dmask = face_mask(free_block);
  if ((amask & dmask) != 0) throw Error("D must be disjoint from A");
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");

  SupharmRegion region;
  region.domain = amask | dmask;
  region.epsilon = epsilon;

  // M = max over j in A and faces A <= C <= A u D of
  //   -((1+b) / (gamma (gamma+b+1))) *
  //     sum_{i in C \ A} m_i v^C_i.e_j / (m_j v^C_j.e_j)
  double big_m = 0.0;
  const double front = (1.0 + spec.b) / (spec.gamma * (spec.gamma + spec.b + 1.0));
  for (FaceMask cmask : enumerate_faces(chain.sites(), 2)) {
    if (!face_subset(amask, cmask) || !face_subset(cmask, region.domain))
      continue;
    const TraceModel<double> trace = trace_process(chain, face_sites(cmask));
    for (int j : spec.block) {
      const int jpos = static_cast<int>(
          std::lower_bound(trace.face.begin(), trace.face.end(), j) -
          trace.face.begin());
      const double denom = chain.m(j) * trace.face_drift(jpos, j);
      double num = 0.0;
      for (std::size_t ipos = 0; ipos < trace.face.size(); ++ipos) {
        const int i = trace.face[ipos];
        if (face_contains(amask, i)) continue;
        num += chain.m(i) * trace.face_drift(static_cast<int>(ipos), j);
      }
      big_m = std::max(big_m, -front * num / denom);
    }
  }
  region.M = big_m;

  // Largest lambda with  M lambda^(1-gamma) <= epsilon  and
  // (gamma+1) lambda^gamma <= 1; both sides are monotone so the
  // constraints invert in closed form.
  const double from_eps =
      big_m > 0.0 ? std::pow(epsilon / big_m, 1.0 / (1.0 - spec.gamma))
                  : std::numeric_limits<double>::infinity();
  const double from_gamma = std::pow(1.0 / (1.0 + spec.gamma), 1.0 / spec.gamma);
  region.lambda = std::min({from_eps, from_gamma, 1.0});

  const double free_count = static_cast<double>(free_block.size());
  region.empty = !(region.lambda > 0.0) || free_count * epsilon > 1.0;
  return region;
}

struct SupharmFaceResult {
  FaceMask face = 0;
  long points = 0;
  double max_value = -std::numeric_limits<double>::infinity();
};

struct SupharmReport {
  SupharmRegion region;
  std::vector<SupharmFaceResult> faces;
  double max_value = -std::numeric_limits<double>::infinity();
  long points = 0;
  bool empty_region = false;
  bool conservative_M = true;  // M maximized over faces, not per-face

  bool pass(double tol) const { return empty_region || max_value <= tol; }
};

namespace detail {

// Stratified product grid on {x in interior Sigma_C: x_k in (0, lambda]
// for k in A, x_i >= eps for i in D cap C}. Block coordinates sweep an
// even grid of (0, lambda]; the remaining mass is spread over the D-block
// by a recursive grid with the epsilon floor.
template <class Fn>
void supharm_face_grid(const std::vector<int>& block_sites,
                       const std::vector<int>& free_sites, double lambda,
                       double epsilon, int per_dim, Eigen::VectorXd& x,
                       std::size_t level, double mass_left, const Fn& visit) {
  const std::size_t nb = block_sites.size();
  if (level < nb) {
    for (int g = 1; g <= per_dim; ++g) {
      x(block_sites[level]) = lambda * static_cast<double>(g) / per_dim;
      supharm_face_grid(block_sites, free_sites, lambda, epsilon, per_dim, x,
                        level + 1, mass_left - x(block_sites[level]), visit);
    }
    return;
  }
  const std::size_t d = level - nb;
  const std::size_t nd = free_sites.size();
  if (d + 1 == nd) {  // last free coordinate takes the remainder
    if (mass_left >= epsilon) {
      x(free_sites[d]) = mass_left;
      visit(x);
    }
    return;
  }
  const double reserve = epsilon * static_cast<double>(nd - d - 1);
  const double hi = mass_left - reserve;
  if (hi < epsilon) return;
  for (int g = 0; g < per_dim; ++g) {
    const double w =
        epsilon + (hi - epsilon) * static_cast<double>(g) /
                      std::max(1, per_dim - 1);
    x(free_sites[d]) = w;
    supharm_face_grid(block_sites, free_sites, lambda, epsilon, per_dim, x,
                      level + 1, mass_left - w, visit);
  }
}

}  // namespace detail

// Grid check of the sign lemma: evaluates the closed-form generator on a
// deterministic stratified grid of the region, per face A <= C <= A u D,
// and reports the largest value found. Contract: max <= residual_tol.
// lambda_override > 0 replaces the computed lambda (diagnostic use; the
// sign claim holds only inside the computed region).
inline SupharmReport verify_supharmonic(const SupharmSpec& spec,
                                        const ChainModel<double>& chain,
                                        const std::vector<int>& free_block,
                                        double epsilon, int grid_per_dim = 25,
                                        double lambda_override = 0.0) {
  SupharmReport report;
  report.region = find_lambda(spec, chain, free_block, epsilon);
  if (lambda_override > 0.0) report.region.lambda = lambda_override;
  if (report.region.empty) {
    report.empty_region = true;
    return report;
  }
  const FaceMask amask = face_mask(spec.block);

  for (FaceMask cmask : enumerate_faces(chain.sites(), 2)) {
    if (!face_subset(amask, cmask) || !face_subset(cmask, report.region.domain))
      continue;
    const TraceModel<double> trace = trace_process(chain, face_sites(cmask));
    SupharmFaceResult result;
    result.face = cmask;

    std::vector<int> free_in_face;
    for (int i : face_sites(cmask))
      if (!face_contains(amask, i)) free_in_face.push_back(i);
    if (free_in_face.empty()) continue;  // no mass left for the D block

    Eigen::VectorXd x = Eigen::VectorXd::Zero(chain.sites());
    detail::supharm_face_grid(
        spec.block, free_in_face, report.region.lambda, epsilon, grid_per_dim,
        x, 0, 1.0, [&](const Eigen::VectorXd& point) {
          const double value = eval_generator_FA(spec, chain, trace, point);
          ++result.points;
          result.max_value = std::max(result.max_value, value);
        });
    if (result.points > 0) {
      report.max_value = std::max(report.max_value, result.max_value);
      report.points += result.points;
      report.faces.push_back(result);
    }
  }
  return report;
}

}  // namespace zrdiff
