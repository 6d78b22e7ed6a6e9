#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "zrdiff/chain.hpp"
#include "zrdiff/errors.hpp"
#include "zrdiff/faces.hpp"
#include "zrdiff/rng.hpp"
#include "zrdiff/trace.hpp"

namespace zrdiff {

// Coefficients of the face generator on Sigma_B: drift
//   b * sum_{j in B} (m_j / x_j) v^B_j
// and noise factor sigma_B with
//   sigma_B sigma_B^T = sum_{j,k in B} m_j r^B(j,k) (e_j - e_k)(e_j - e_k)^T,
// so Euler-Maruyama realizes the Hessian term
//   (1/2) sum_{j,k} m_j r^B(j,k) grad^2_{e_j - e_k}.
// For B = S the diffusion matrix equals a + a^T.
struct FaceDynamics {
  std::vector<int> face;
  FaceMask mask = 0;
  double b = 1.0;
  Eigen::VectorXd face_m;       // m_j for j in face
  Eigen::MatrixXd face_drift;   // |B| x p, row j = v^B_j
  Eigen::MatrixXd diffusion;    // p x p, sigma sigma^T; rows sum to zero
  Eigen::MatrixXd noise;        // p x p factor, rank |B| - 1

  Eigen::VectorXd drift(const Eigen::VectorXd& x) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(x.size());
    for (std::size_t j = 0; j < face.size(); ++j) {
      const double xj = x(face[j]);
      if (!(xj > 0.0))
        throw NonFiniteDrift("active coordinate is zero; missed absorption");
      d += (b * face_m(static_cast<int>(j)) / xj) *
           face_drift.row(static_cast<int>(j)).transpose();
    }
    return d;
  }
};

inline FaceDynamics face_dynamics(const ChainModel<double>& chain,
                                  const std::vector<int>& face) {
  const TraceModel<double> trace = trace_process(chain, face);
  const int p = chain.sites();
  const int nb = static_cast<int>(face.size());

  FaceDynamics dyn;
  dyn.face = face;
  dyn.mask = trace.mask;
  dyn.b = chain.b;
  dyn.face_m.resize(nb);
  for (int j = 0; j < nb; ++j) dyn.face_m(j) = chain.m(face[j]);
  dyn.face_drift = trace.face_drift;

  dyn.diffusion = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < nb; ++j)
    for (int k = 0; k < nb; ++k) {
      const double w = dyn.face_m(j) * trace.rates(j, k);
      if (w == 0.0) continue;
      dyn.diffusion(face[j], face[j]) += w;
      dyn.diffusion(face[k], face[k]) += w;
      dyn.diffusion(face[j], face[k]) -= w;
      dyn.diffusion(face[k], face[j]) -= w;
    }

  // Factor once per face by symmetric eigendecomposition; the matrix is
  // PSD with rank |B| - 1 (tangent to the face). Eigenvalues below the
  // relative cutoff are numerical zeros of the rank-deficient form and
  // must not leak noise through the square root.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dyn.diffusion);
  const double cutoff = eig.eigenvalues().maxCoeff() * 1e-12;
  Eigen::VectorXd scale(p);
  for (int i = 0; i < p; ++i)
    scale(i) = eig.eigenvalues()(i) > cutoff ? std::sqrt(eig.eigenvalues()(i))
                                             : 0.0;
  dyn.noise = eig.eigenvectors() * scale.asDiagonal();
  return dyn;
}

// Read-only table of FaceDynamics for every face with >= 2 sites,
// precomputed eagerly so replica workers can share it without locking.
class FaceDynamicsCache {
 public:
  explicit FaceDynamicsCache(const ChainModel<double>& chain) {
    for (FaceMask mask : enumerate_faces(chain.sites(), 2))
      table_.emplace(mask, face_dynamics(chain, face_sites(mask)));
  }
  const FaceDynamics& at(FaceMask mask) const { return table_.at(mask); }

 private:
  std::map<FaceMask, FaceDynamics> table_;
};

// One Euler-Maruyama step on the active face: drift dt + noise sqrt(dt),
// then an exact sum repair. Off-face coordinates stay identically zero
// because both drift and noise are supported on the face.
inline Eigen::VectorXd em_step(const Eigen::VectorXd& x,
                               const FaceDynamics& dyn, double dt,
                               const Eigen::VectorXd& gaussians) {
  if (!(dt > 0.0)) throw Error("em_step needs dt > 0");
  Eigen::VectorXd next =
      x + dt * dyn.drift(x) + std::sqrt(dt) * (dyn.noise * gaussians);
  double active_sum = 0.0;
  for (int j : dyn.face) active_sum += next(j);
  for (int j : dyn.face) next(j) /= active_sum;
  return next;
}

struct DiffusionControls {
  double dt_base = 1e-4;
  double eps_abs = 1e-4;   // absorption threshold on active coordinates
  double x_ref = 0.1;      // dt = dt_base * min(1, (min_B x / x_ref)^2)
  double dt_floor = 1e-14;
  std::uint64_t max_steps = 2'000'000'000ULL;
};

// Times and faces of the successive support collapses. faces[0] is the
// ambient face S; a start on a proper face is stored explicitly as a
// collapse at sigma_1 = 0. faces is strictly decreasing and sigmas[k] is
// the time support faces[k+1] was reached.
struct AbsorptionRecord {
  std::vector<double> sigmas;
  std::vector<FaceMask> faces;
  std::optional<int> terminal;

  double first_hit() const { return sigmas.empty() ? 0.0 : sigmas.front(); }
};

struct DiffusionPath {
  Eigen::VectorXd sample_times;
  Eigen::MatrixXd points;
  std::vector<FaceMask> face_at_sample;
  AbsorptionRecord record;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t steps = 0;
};

// Integrate the dimension-decaying diffusion from x0 until the last grid
// time. Absorption: whenever an active coordinate falls to <= eps_abs (or
// overshoots below zero), it is zeroed, the rest renormalized, and the
// dynamics switch to the trace of the ORIGINAL chain on the new support,
// down to a vertex where the path freezes. Steps are clamped to land on
// grid times exactly. Deterministic given (inputs, seed, stream).
inline DiffusionPath simulate_diffusion(const ChainModel<double>& chain,
                                        const FaceDynamicsCache& cache,
                                        const Eigen::VectorXd& x0,
                                        const Eigen::VectorXd& sample_grid,
                                        const DiffusionControls& controls,
                                        std::uint64_t seed,
                                        std::uint64_t stream = 0) {
  const int p = chain.sites();
  if (x0.size() != p) throw Error("x0 dimension mismatch");
  if ((x0.array() < 0.0).any() || std::abs(x0.sum() - 1.0) > 1e-9)
    throw Error("x0 must lie on the simplex");
  if (sample_grid.size() == 0) throw Error("empty sample grid");
  for (int s = 1; s < sample_grid.size(); ++s)
    if (!(sample_grid(s) > sample_grid(s - 1)))
      throw Error("sample grid must be strictly increasing");

  DiffusionPath path;
  path.seed = seed;
  path.stream = stream;
  path.sample_times = sample_grid;
  path.points.resize(sample_grid.size(), p);
  path.face_at_sample.resize(static_cast<std::size_t>(sample_grid.size()));

  CounterRng rng(seed, stream);
  Eigen::VectorXd x = x0 / x0.sum();

  FaceMask active = 0;
  for (int i = 0; i < p; ++i)
    if (x(i) > 0.0) active |= (FaceMask{1} << i);
  path.record.faces.push_back(full_face(p));
  if (active != full_face(p)) {  // sigma_1 = 0 convention for a face start
    path.record.sigmas.push_back(0.0);
    path.record.faces.push_back(active);
  }

  double t = 0.0;
  int next_sample = 0;
  Eigen::VectorXd gaussians(p);

  auto record_if_due = [&]() {
    while (next_sample < sample_grid.size() &&
           sample_grid(next_sample) <= t + 1e-15 * (1.0 + std::abs(t))) {
      path.points.row(next_sample) = x;
      path.face_at_sample[static_cast<std::size_t>(next_sample)] = active;
      ++next_sample;
    }
  };

  // Zero every active coordinate at or below the threshold, renormalize
  // the survivors, record the collapse. Returns false once at a vertex.
  auto absorb_if_hit = [&]() {
    bool hit = false;
    for (int i : face_sites(active))
      if (x(i) <= controls.eps_abs) hit = true;
    if (!hit) return true;
    FaceMask next_face = 0;
    double kept = 0.0;
    for (int i : face_sites(active)) {
      if (x(i) <= controls.eps_abs) {
        x(i) = 0.0;
      } else {
        next_face |= (FaceMask{1} << i);
        kept += x(i);
      }
    }
    if (next_face == 0) {
      // Every active coordinate crossed at once; keep the largest so the
      // path lands on a vertex instead of vanishing.
      int best = face_sites(active).front();
      for (int i : face_sites(active))
        if (x(i) > x(best)) best = i;
      next_face = FaceMask{1} << best;
      kept = 1.0;
      x.setZero();
      x(best) = 1.0;
    } else {
      for (int i : face_sites(next_face)) x(i) /= kept;
    }
    active = next_face;
    // Collapses at the same instant merge into one record entry, keeping
    // sigmas strictly increasing and faces strictly decreasing.
    if (!path.record.sigmas.empty() && path.record.sigmas.back() == t) {
      path.record.faces.back() = active;
    } else {
      path.record.sigmas.push_back(t);
      path.record.faces.push_back(active);
    }
    return face_size(active) > 1;
  };

  bool moving = face_size(active) > 1 && absorb_if_hit();
  if (face_size(active) == 1) moving = false;

  while (next_sample < sample_grid.size()) {
    if (!moving) {  // trapped at a vertex: state holds forever
      if (face_size(active) == 1 && !path.record.terminal)
        path.record.terminal = face_sites(active).front();
      record_if_due();
      while (next_sample < sample_grid.size()) {
        path.points.row(next_sample) = x;
        path.face_at_sample[static_cast<std::size_t>(next_sample)] = active;
        ++next_sample;
      }
      break;
    }

    record_if_due();
    if (next_sample >= sample_grid.size()) break;

    const FaceDynamics& dyn = cache.at(active);
    double min_active = 1.0;
    for (int i : dyn.face) min_active = std::min(min_active, x(i));
    const double shrink = min_active / controls.x_ref;
    double dt = controls.dt_base * std::min(1.0, shrink * shrink);
    if (dt < controls.dt_floor)
      throw StepUnderflow("adaptive dt fell below the floor");
    dt = std::min(dt, sample_grid(next_sample) - t);

    for (int i = 0; i < p; ++i) gaussians(i) = rng.gaussian();
    x = em_step(x, dyn, dt, gaussians);
    t += dt;
    if (path.steps++ >= controls.max_steps)
      throw HorizonOverflow("step cap exceeded");

    if (!absorb_if_hit()) {
      moving = false;
      if (!path.record.terminal)
        path.record.terminal = face_sites(active).front();
    }
  }
  return path;
}

// Expected-time bound for the first support collapse from a point with
// support B:  |B|^((q-1) v 1) / ((q+1)(q-b) d(B)),
// d(B) = min_{j in B} (1/2) sum_{k != j} (m_j r(j,k) + m_k r(k,j)).
// `rates` is |B| x |B| indexed by position within `face`; `m` is the full
// stationary vector indexed by site. Pass trace rates to bound later
// stages.
inline double absorption_bound(const Eigen::MatrixXd& rates,
                               const Eigen::VectorXd& m,
                               const std::vector<int>& face, double b,
                               double q) {
  if (!(q > b)) throw BadQ("bound requires q > b");
  if (face.size() < 2) throw DegenerateFace("bound needs |B| >= 2");
  const int nb = static_cast<int>(face.size());
  double d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < nb; ++j) {
    double s = 0.0;
    for (int k = 0; k < nb; ++k) {
      if (k == j) continue;
      s += 0.5 * (m(face[j]) * rates(j, k) + m(face[k]) * rates(k, j));
    }
    d = std::min(d, s);
  }
  const double power = std::max(q - 1.0, 1.0);
  return std::pow(static_cast<double>(nb), power) / ((q + 1.0) * (q - b) * d);
}

inline double absorption_bound(const ChainModel<double>& chain,
                               const std::vector<int>& face, double q) {
  const int nb = static_cast<int>(face.size());
  Eigen::MatrixXd sub(nb, nb);
  for (int j = 0; j < nb; ++j)
    for (int k = 0; k < nb; ++k) sub(j, k) = chain.rates(face[j], face[k]);
  return absorption_bound(sub, chain.m, face, chain.b, q);
}

}  // namespace zrdiff
