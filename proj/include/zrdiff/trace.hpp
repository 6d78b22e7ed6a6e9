#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "zrdiff/chain.hpp"
#include "zrdiff/errors.hpp"
#include "zrdiff/faces.hpp"
#include "zrdiff/numeric_policy.hpp"
#include "zrdiff/rng.hpp"

namespace zrdiff {

// Everything the diffusion needs about the chain watched on a face B:
// equilibrium potentials u^B, trace rates r^B, trace holding rates
// lambda^B, the projection gamma_B and the face drift vectors v^B_j.
template <class Scalar>
struct TraceModel {
  std::vector<int> face;          // sorted sites of B
  FaceMask mask = 0;
  MatrixX<Scalar> potentials;     // |B| x p, row k = u^B_{face[k]}(.)
  MatrixX<Scalar> rates;          // |B| x |B| trace rates r^B, zero diagonal
  VectorX<Scalar> holding;        // lambda^B(j) = -(L_S u^B_j)(j)
  MatrixX<Scalar> projection;     // p x p matrix of gamma_B
  MatrixX<Scalar> face_drift;     // |B| x p, row j = v^B_j in R^p
};

namespace detail {

template <class Scalar>
void check_face(const ChainModel<Scalar>& chain, const std::vector<int>& face,
                int min_size) {
  if (static_cast<int>(face.size()) < min_size)
    throw DegenerateFace("face needs at least " + std::to_string(min_size) +
                         " sites");
  for (int s : face)
    if (s < 0 || s >= chain.sites())
      throw Error("face site out of range");
  for (std::size_t k = 1; k < face.size(); ++k)
    if (face[k] <= face[k - 1]) throw Error("face sites must be sorted");
}

}  // namespace detail

// Harmonic extensions of the vertex indicators on B: row k solves
//   u(j) = delta_{face[k], j}   on B,
//   (L_S u)(j) = 0              on S \ B,
// via a dense partial-pivot solve on the interior block.
template <class Scalar>
MatrixX<Scalar> equilibrium_potentials(const ChainModel<Scalar>& chain,
                                       const std::vector<int>& face) {
  detail::check_face(chain, face, 1);
  const int p = chain.sites();
  const int nb = static_cast<int>(face.size());
  MatrixX<Scalar> u = MatrixX<Scalar>::Zero(nb, p);

  if (nb == 1) {  // every path hits the single target
    u.setOnes();
    return u;
  }
  for (int k = 0; k < nb; ++k) u(k, face[k]) = Scalar{1};

  std::vector<int> interior;
  FaceMask mask = face_mask(face);
  for (int j = 0; j < p; ++j)
    if (!face_contains(mask, j)) interior.push_back(j);
  if (interior.empty()) return u;  // B = S: indicators are already harmonic

  const int ni = static_cast<int>(interior.size());
  MatrixX<Scalar> interior_op(ni, ni);  // -(generator restricted to S \ B)
  for (int a = 0; a < ni; ++a)
    for (int c = 0; c < ni; ++c)
      interior_op(a, c) = (a == c) ? chain.holding(interior[a])
                                   : -chain.rates(interior[a], interior[c]);

  Eigen::PartialPivLU<MatrixX<Scalar>> lu(interior_op);
  using std::abs;
  Scalar min_pivot = abs(lu.matrixLU().diagonal().array()).minCoeff();
  if (!(min_pivot > Scalar{0}))
    throw SingularSystem("interior hitting system is singular");

  MatrixX<Scalar> rhs(ni, nb);
  for (int a = 0; a < ni; ++a)
    for (int k = 0; k < nb; ++k) rhs(a, k) = chain.rates(interior[a], face[k]);
  MatrixX<Scalar> sol = lu.solve(rhs);
  for (int a = 0; a < ni; ++a)
    for (int k = 0; k < nb; ++k) u(k, interior[a]) = sol(a, k);
  return u;
}

// Projection gamma_B as a p x p matrix:
//   [gamma_B(x)]_j = x_j + sum_{k not in B} u^B_j(k) x_k  for j in B,
//   zero coordinates outside B. Idempotent; kernel spanned by
//   {v_k : k not in B}.
template <class Scalar>
MatrixX<Scalar> projection_from_potentials(const std::vector<int>& face,
                                           const MatrixX<Scalar>& potentials) {
  const int p = static_cast<int>(potentials.cols());
  MatrixX<Scalar> proj = MatrixX<Scalar>::Zero(p, p);
  for (std::size_t k = 0; k < face.size(); ++k)
    proj.row(face[k]) = potentials.row(static_cast<int>(k));
  return proj;
}

template <class Scalar>
MatrixX<Scalar> projection_matrix(const ChainModel<Scalar>& chain,
                                  const std::vector<int>& face) {
  return projection_from_potentials(face,
                                    equilibrium_potentials(chain, face));
}

// Trace of the chain on B (|B| >= 2): r^B(j,k) = sum_l r(j,l) u^B_k(l)
// off the diagonal, lambda^B(j) = -(L_S u^B_j)(j), and the face drift
// vectors v^B_j = sum_k r^B(j,k)(e_k - e_j).
template <class Scalar>
TraceModel<Scalar> trace_process(const ChainModel<Scalar>& chain,
                                 const std::vector<int>& face) {
  detail::check_face(chain, face, 2);
  const int p = chain.sites();
  const int nb = static_cast<int>(face.size());

  TraceModel<Scalar> model;
  model.face = face;
  model.mask = face_mask(face);
  model.potentials = equilibrium_potentials(chain, face);
  model.projection = projection_from_potentials(face, model.potentials);

  model.rates = MatrixX<Scalar>::Zero(nb, nb);
  model.holding = VectorX<Scalar>::Zero(nb);
  for (int j = 0; j < nb; ++j) {
    for (int k = 0; k < nb; ++k) {
      if (j == k) continue;
      model.rates(j, k) = chain.rates.row(face[j]).dot(model.potentials.row(k));
    }
    // lambda^B(j) = lambda_j - sum_l r(j,l) u^B_j(l)
    model.holding(j) = chain.holding(face[j]) -
                       chain.rates.row(face[j]).dot(model.potentials.row(j));
  }

  model.face_drift = MatrixX<Scalar>::Zero(nb, p);
  for (int j = 0; j < nb; ++j) {
    for (int k = 0; k < nb; ++k) {
      if (j == k) continue;
      model.face_drift(j, face[k]) += model.rates(j, k);
      model.face_drift(j, face[j]) -= model.rates(j, k);
    }
  }

  if (!strongly_connected(MatrixX<Scalar>(model.rates)))
    throw Error("trace chain is not irreducible; broken model");
  return model;
}

// Max-norm of gamma_B gamma_C - gamma_B for nested faces B subset of C.
template <class Scalar>
Scalar projection_composition_residual(const ChainModel<Scalar>& chain,
                                       const std::vector<int>& inner,
                                       const std::vector<int>& outer) {
  if (!face_subset(face_mask(inner), face_mask(outer)))
    throw Error("composition check needs nested faces B subset of C");
  MatrixX<Scalar> pb = projection_matrix(chain, inner);
  MatrixX<Scalar> pc = projection_matrix(chain, outer);
  return (pb * pc - pb).template lpNorm<Eigen::Infinity>();
}

// The face D subset of B with gamma_B(interior of Sigma_C) inside the
// interior of Sigma_D. Purely combinatorial in the support of u:
//   G = { i in B : u^B_i(k) = 0 for every k in (S\B) cap C },
//   D = (B cap C) union (B \ G).
template <class Scalar>
std::vector<int> face_image(const ChainModel<Scalar>& chain,
                            const std::vector<int>& face,
                            const std::vector<int>& source,
                            const NumericPolicy& policy = {}) {
  detail::check_face(chain, face, 1);
  detail::check_face(chain, source, 1);
  const MatrixX<Scalar> u = equilibrium_potentials(chain, face);
  const FaceMask bmask = face_mask(face);
  const FaceMask cmask = face_mask(source);

  std::vector<int> image;
  for (std::size_t j = 0; j < face.size(); ++j) {
    const int site = face[j];
    if (face_contains(cmask, site)) {
      image.push_back(site);
      continue;
    }
    bool hit = false;  // site belongs to B \ G?
    for (int k = 0; k < chain.sites(); ++k) {
      if (face_contains(bmask, k) || !face_contains(cmask, k)) continue;
      if (static_cast<double>(u(static_cast<int>(j), k)) > policy.support_tol) {
        hit = true;
        break;
      }
    }
    if (hit) image.push_back(site);
  }
  return image;
}

// Monte Carlo estimate of which target in B the chain hits first. Runs the
// embedded jump chain; unbiased for u^B_k(start).
struct HittingEstimate {
  std::vector<int> face;
  Eigen::VectorXd frequency;       // empirical P[T_k = T_B], face order
  Eigen::VectorXd standard_error;  // sqrt(f(1-f)/runs)
  long runs = 0;
};

inline HittingEstimate mc_hitting_oracle(const ChainModel<double>& chain,
                                         int start,
                                         const std::vector<int>& face,
                                         long runs, std::uint64_t seed,
                                         std::uint64_t stream = 0) {
  detail::check_face(chain, face, 1);
  if (runs < 1) throw Error("mc_hitting_oracle needs runs >= 1");
  const int p = chain.sites();
  const FaceMask mask = face_mask(face);
  std::vector<long> counts(face.size(), 0);
  CounterRng rng(seed, stream);

  for (long run = 0; run < runs; ++run) {
    int site = start;
    while (!face_contains(mask, site)) {
      const double pick = rng.uniform() * chain.holding(site);
      double acc = 0.0;
      int next = -1;
      for (int j = 0; j < p; ++j) {
        if (chain.rates(site, j) <= 0.0) continue;
        acc += chain.rates(site, j);
        next = j;
        if (pick < acc) break;
      }
      site = next;
    }
    const auto it = std::lower_bound(face.begin(), face.end(), site);
    ++counts[static_cast<std::size_t>(it - face.begin())];
  }

  HittingEstimate est;
  est.face = face;
  est.runs = runs;
  est.frequency.resize(static_cast<int>(face.size()));
  est.standard_error.resize(static_cast<int>(face.size()));
  for (std::size_t k = 0; k < face.size(); ++k) {
    const double f = static_cast<double>(counts[k]) / static_cast<double>(runs);
    est.frequency(static_cast<int>(k)) = f;
    est.standard_error(static_cast<int>(k)) =
        std::sqrt(f * (1.0 - f) / static_cast<double>(runs));
  }
  return est;
}

}  // namespace zrdiff
