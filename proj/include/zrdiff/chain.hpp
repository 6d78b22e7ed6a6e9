#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "zrdiff/errors.hpp"
#include "zrdiff/numeric_policy.hpp"

namespace zrdiff {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Finite irreducible continuous-time chain on p sites together with every
// static quantity derived from it: stationary state m, holding rates
// lambda_i, drift vectors v_i (rows of `drift`), and the second-order
// coefficient matrix a. Immutable after construction; share freely.
template <class Scalar>
struct ChainModel {
  MatrixX<Scalar> rates;   // r(i,j), zero diagonal
  Scalar b{1};             // drift strength, >= 1
  VectorX<Scalar> m;       // stationary state, positive, sums to 1
  VectorX<Scalar> holding; // lambda_i = sum_{j != i} r(i,j)
  MatrixX<Scalar> drift;   // row i = v_i = sum_j r(i,j)(e_j - e_i)
  MatrixX<Scalar> a;       // a_ij = -m_i r(i,j) (i != j), a_ii = m_i lambda_i

  int sites() const { return static_cast<int>(rates.rows()); }
};

// Strong connectivity of the positive-rate digraph, by forward and
// backward reachability from site 0 (p is tiny, O(p^2) per sweep).
template <class Scalar>
bool strongly_connected(const MatrixX<Scalar>& rates) {
  const int p = static_cast<int>(rates.rows());
  auto reach = [&](bool forward) {
    std::vector<char> seen(p, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < p; ++j) {
        const Scalar rate = forward ? rates(i, j) : rates(j, i);
        if (rate > Scalar{0} && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    for (char s : seen)
      if (!s) return false;
    return true;
  };
  return reach(true) && reach(false);
}

// Unique stationary state of the chain: solves the consistent augmented
// system [Q^T; 1^T] m = [0; 1] by column-pivoted QR.
template <class Scalar>
VectorX<Scalar> stationary_state(const MatrixX<Scalar>& rates) {
  const int p = static_cast<int>(rates.rows());
  MatrixX<Scalar> generator = rates;
  generator.diagonal() = -rates.rowwise().sum();
  MatrixX<Scalar> sys(p + 1, p);
  sys.topRows(p) = generator.transpose();
  sys.row(p).setOnes();
  VectorX<Scalar> rhs = VectorX<Scalar>::Zero(p + 1);
  rhs(p) = Scalar{1};
  return sys.colPivHouseholderQr().solve(rhs);
}

template <class Scalar>
ChainModel<Scalar> build_chain(const MatrixX<Scalar>& rates, Scalar b,
                               const NumericPolicy& policy = {}) {
  const int p = static_cast<int>(rates.rows());
  if (p < 2 || rates.cols() != rates.rows())
    throw Error("rate matrix must be square with at least two sites");
  if ((rates.array() < Scalar{0}).any())
    throw Error("negative jump rate");
  for (int i = 0; i < p; ++i)
    if (rates(i, i) != Scalar{0})
      throw NonzeroDiagonal("r(i,i) != 0 at site " + std::to_string(i + 1));
  if (!strongly_connected(rates))
    throw NotIrreducible("positive-rate digraph is not strongly connected");
  if (b < Scalar{1})
    throw BadB("drift strength b < 1 (no-condensation regime)");

  ChainModel<Scalar> chain;
  chain.rates = rates;
  chain.b = b;
  chain.holding = rates.rowwise().sum();
  chain.m = stationary_state(rates);

  chain.drift = rates;
  chain.drift.diagonal() = -chain.holding;

  chain.a = -(chain.m.asDiagonal() * rates);
  chain.a.diagonal() = chain.m.cwiseProduct(chain.holding);

  using std::abs;
  for (int i = 0; i < p; ++i)
    if (!(chain.m(i) > Scalar{0}))
      throw Error("stationary state not strictly positive");
  const Scalar residual =
      (chain.drift.transpose() * chain.m).template lpNorm<Eigen::Infinity>();
  if (static_cast<double>(residual) > policy.algebra_tol)
    throw Error("stationary solve residual above tolerance");
  return chain;
}

// Time reversal with respect to m: r'(i,j) = m_j r(j,i) / m_i. Keeps the
// stationary state; applying it twice returns the original rates.
template <class Scalar>
ChainModel<Scalar> adjoint(const ChainModel<Scalar>& chain,
                           const NumericPolicy& policy = {}) {
  const int p = chain.sites();
  MatrixX<Scalar> reversed(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      reversed(i, j) = (i == j) ? Scalar{0}
                                : chain.m(j) * chain.rates(j, i) / chain.m(i);
  return build_chain(reversed, chain.b, policy);
}

// (L_S f)(i) = sum_j r(i,j) [f(j) - f(i)] = v_i . f
template <class Scalar, class Derived>
VectorX<Scalar> generator_apply(const ChainModel<Scalar>& chain,
                                const Eigen::MatrixBase<Derived>& f) {
  return chain.drift * f;
}

}  // namespace zrdiff
