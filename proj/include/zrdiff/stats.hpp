#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "zrdiff/errors.hpp"
#include "zrdiff/parallel.hpp"
#include "zrdiff/rng.hpp"

namespace zrdiff {

// Exact empirical 1-Wasserstein distance between two one-dimensional
// samples. Equal sizes use the sorted-sample pairing directly (mean
// absolute difference of order statistics, exactly zero on identical
// samples); unequal sizes integrate the area between the empirical CDFs.
inline double wasserstein1(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || ys.empty()) throw Error("wasserstein1 needs samples");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  if (xs.size() == ys.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) sum += std::abs(xs[i] - ys[i]);
    return sum / static_cast<double>(xs.size());
  }
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());

  double distance = 0.0;
  double cdf_gap = 0.0;  // F_X(t) - F_Y(t) on the current interval
  std::size_t i = 0, j = 0;
  double prev = std::min(xs[0], ys[0]);
  while (i < xs.size() || j < ys.size()) {
    const double next_x = i < xs.size() ? xs[i] : std::numeric_limits<double>::infinity();
    const double next_y = j < ys.size() ? ys[j] : std::numeric_limits<double>::infinity();
    const double t = std::min(next_x, next_y);
    distance += std::abs(cdf_gap) * (t - prev);
    while (i < xs.size() && xs[i] == t) {
      cdf_gap += 1.0 / nx;
      ++i;
    }
    while (j < ys.size() && ys[j] == t) {
      cdf_gap -= 1.0 / ny;
      ++j;
    }
    prev = t;
  }
  return distance;
}

// Energy-distance statistic between multivariate samples (rows):
//   2 E|X-Y| - E|X-X'| - E|Y-Y'|, Euclidean norm. Nonnegative in
// expectation, zero iff the laws agree.
inline double energy_distance(const Eigen::MatrixXd& xs,
                              const Eigen::MatrixXd& ys) {
  const auto mean_cross = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < b.rows(); ++j)
        s += (a.row(i) - b.row(j)).norm();
    return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  };
  return 2.0 * mean_cross(xs, ys) - mean_cross(xs, xs) - mean_cross(ys, ys);
}

struct BootstrapCi {
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  double halfwidth() const { return 0.5 * (hi - lo); }
};

inline double normal_quantile_two_sided(double level) {
  // Levels used by the harness; avoids shipping an inverse-erf.
  if (level >= 0.995) return 2.807033768343811;   // 99.5%
  if (level >= 0.99) return 2.5758293035489004;   // 99%
  if (level >= 0.95) return 1.959963984540054;    // 95%
  if (level >= 0.90) return 1.6448536269514722;   // 90%
  return 1.0;
}

// Centered bootstrap interval for a two-sample statistic: both samples
// are resampled with replacement, the bootstrap spread gives the standard
// error, and the interval is estimate +/- z se (so it always brackets the
// point estimate). Resample draws are indexed streams of `seed`, making
// the interval independent of the thread count.
inline BootstrapCi bootstrap_ci_two_sample(
    const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
    const std::function<double(const Eigen::MatrixXd&, const Eigen::MatrixXd&)>&
        statistic,
    int resamples, double level, std::uint64_t seed, int threads = 1,
    int resample_rows = 0, bool nonnegative = true) {
  if (resamples < 2) throw Error("bootstrap needs at least 2 resamples");
  BootstrapCi ci;
  ci.estimate = statistic(xs, ys);

  const int nx = resample_rows > 0 ? std::min<int>(resample_rows, static_cast<int>(xs.rows()))
                                   : static_cast<int>(xs.rows());
  const int ny = resample_rows > 0 ? std::min<int>(resample_rows, static_cast<int>(ys.rows()))
                                   : static_cast<int>(ys.rows());
  std::vector<double> values(static_cast<std::size_t>(resamples));
  parallel_for(static_cast<std::size_t>(resamples), threads, [&](std::size_t r) {
    CounterRng rng(seed, 0x3000000000000000ULL + r);
    Eigen::MatrixXd bx(nx, xs.cols());
    Eigen::MatrixXd by(ny, ys.cols());
    for (int i = 0; i < nx; ++i)
      bx.row(i) = xs.row(static_cast<int>(rng.below(static_cast<std::uint64_t>(xs.rows()))));
    for (int i = 0; i < ny; ++i)
      by.row(i) = ys.row(static_cast<int>(rng.below(static_cast<std::uint64_t>(ys.rows()))));
    values[r] = statistic(bx, by);
  });

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(resamples);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(resamples - 1);
  ci.se = std::sqrt(var);

  const double z = normal_quantile_two_sided(level);
  ci.lo = ci.estimate - z * ci.se;
  ci.hi = ci.estimate + z * ci.se;
  if (nonnegative) ci.lo = std::max(0.0, ci.lo);
  return ci;
}

// Level-quantile of the statistic under the pooled-permutation null
// (both samples drawn from the merged rows). A distance at or below this
// band is consistent with equal laws at the given level.
inline double permutation_null_quantile(
    const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
    const std::function<double(const Eigen::MatrixXd&, const Eigen::MatrixXd&)>&
        statistic,
    int permutations, double level, std::uint64_t seed, int threads = 1) {
  const int nx = static_cast<int>(xs.rows());
  const int ny = static_cast<int>(ys.rows());
  Eigen::MatrixXd pool(nx + ny, xs.cols());
  pool.topRows(nx) = xs;
  pool.bottomRows(ny) = ys;

  std::vector<double> values(static_cast<std::size_t>(permutations));
  parallel_for(static_cast<std::size_t>(permutations), threads,
               [&](std::size_t r) {
                 CounterRng rng(seed, 0x5000000000000000ULL + r);
                 std::vector<int> order(static_cast<std::size_t>(nx + ny));
                 for (int i = 0; i < nx + ny; ++i)
                   order[static_cast<std::size_t>(i)] = i;
                 for (int i = nx + ny - 1; i > 0; --i) {
                   const int j = static_cast<int>(
                       rng.below(static_cast<std::uint64_t>(i + 1)));
                   std::swap(order[static_cast<std::size_t>(i)],
                             order[static_cast<std::size_t>(j)]);
                 }
                 Eigen::MatrixXd a(nx, pool.cols()), b(ny, pool.cols());
                 for (int i = 0; i < nx; ++i)
                   a.row(i) = pool.row(order[static_cast<std::size_t>(i)]);
                 for (int i = 0; i < ny; ++i)
                   b.row(i) =
                       pool.row(order[static_cast<std::size_t>(nx + i)]);
                 values[r] = statistic(a, b);
               });
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(
      level * static_cast<double>(permutations - 1) + 0.5);
  return values[std::min(idx, values.size() - 1)];
}

struct MeanCi {
  double mean = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  long n = 0;

  bool contains(double v) const { return lo <= v && v <= hi; }
};

inline MeanCi mean_ci(const std::vector<double>& samples, double level) {
  if (samples.size() < 2) throw Error("mean_ci needs at least 2 samples");
  MeanCi out;
  out.n = static_cast<long>(samples.size());
  for (double v : samples) out.mean += v;
  out.mean /= static_cast<double>(out.n);
  double var = 0.0;
  for (double v : samples) var += (v - out.mean) * (v - out.mean);
  var /= static_cast<double>(out.n - 1);
  out.se = std::sqrt(var / static_cast<double>(out.n));
  const double z = normal_quantile_two_sided(level);
  out.lo = out.mean - z * out.se;
  out.hi = out.mean + z * out.se;
  return out;
}

inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw Error("quantile of empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double w = pos - std::floor(pos);
  return (1.0 - w) * xs[lo] + w * xs[hi];
}

}  // namespace zrdiff
