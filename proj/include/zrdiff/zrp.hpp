#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "zrdiff/chain.hpp"
#include "zrdiff/errors.hpp"
#include "zrdiff/rng.hpp"

namespace zrdiff {

// Site-dependent jump rates g_i(n). The default family g_i(n) = m_i(1+b/n)
// meets the tail condition n (g_i(n)/m_i - 1) -> b with exact equality at
// every n. A table variant holds user-supplied low-occupancy values and
// falls back to the default formula beyond the table.
struct JumpRateFamily {
  enum class Kind { kDefault, kTable };
  Kind kind = Kind::kDefault;
  double b = 1.0;
  Eigen::VectorXd m;                            // reference stationary vector
  std::vector<std::vector<double>> table;       // table[i][n-1] = g_i(n)

  double rate(int site, long n) const {
    if (n <= 0) return 0.0;
    if (kind == Kind::kTable) {
      const auto& row = table[static_cast<std::size_t>(site)];
      if (n <= static_cast<long>(row.size()))
        return row[static_cast<std::size_t>(n - 1)];
    }
    return m(site) * (1.0 + b / static_cast<double>(n));
  }

  // Residual of the tail condition at occupancy n: n (g_i(n)/m_i - 1) - b.
  double condition_residual(int site, long n) const {
    return static_cast<double>(n) * (rate(site, n) / m(site) - 1.0) - b;
  }
};

inline JumpRateFamily default_rates(const ChainModel<double>& chain) {
  JumpRateFamily g;
  g.kind = JumpRateFamily::Kind::kDefault;
  g.b = chain.b;
  g.m = chain.m;
  return g;
}

inline JumpRateFamily table_rates(const ChainModel<double>& chain,
                                  std::vector<std::vector<double>> table) {
  if (static_cast<int>(table.size()) != chain.sites())
    throw Error("rate table needs one row per site");
  for (const auto& row : table)
    for (double v : row)
      if (!(v > 0.0)) throw Error("table rates must be positive for n >= 1");
  JumpRateFamily g;
  g.kind = JumpRateFamily::Kind::kTable;
  g.b = chain.b;
  g.m = chain.m;
  g.table = std::move(table);
  return g;
}

struct ZrpState {
  Eigen::VectorXi eta;  // occupation counts, sum = total
  long total = 0;
};

inline ZrpState make_state(const Eigen::VectorXi& eta) {
  if ((eta.array() < 0).any()) throw Error("negative occupation count");
  ZrpState s;
  s.eta = eta;
  s.total = eta.cast<long>().sum();
  if (s.total == 0) throw EmptyConfig("configuration has no particles");
  return s;
}

// eta = round(N x0) with largest-remainder correction, so the embedded
// start converges to x0 and conserves exactly N particles.
inline ZrpState state_from_point(const Eigen::VectorXd& x0, long n) {
  if (n < 1) throw EmptyConfig("particle count must be >= 1");
  const int p = static_cast<int>(x0.size());
  Eigen::VectorXi eta(p);
  std::vector<std::pair<double, int>> remainders(static_cast<std::size_t>(p));
  long assigned = 0;
  for (int i = 0; i < p; ++i) {
    const double exact = x0(i) * static_cast<double>(n);
    eta(i) = static_cast<int>(std::floor(exact));
    assigned += eta(i);
    remainders[static_cast<std::size_t>(i)] = {exact - std::floor(exact), i};
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              return a.first > b.first || (a.first == b.first && a.second < b.second);
            });
  for (long k = 0; k < n - assigned; ++k)
    eta(remainders[static_cast<std::size_t>(k) % remainders.size()].second) += 1;
  return make_state(eta);
}

// iota_N(eta)_i = eta_i / N
inline Eigen::VectorXd embed(const ZrpState& state) {
  if (state.total < 1) throw EmptyConfig("configuration has no particles");
  return state.eta.cast<double>() / static_cast<double>(state.total);
}

struct ZrpPath {
  Eigen::VectorXd sample_times;  // rescaled time grid
  Eigen::MatrixXd points;        // row s = X^N at sample_times(s)
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t events = 0;
};

// Exact-event Gillespie run of the zero-range chain, reported on the
// diffusive clock: chain time = N^2 * rescaled time, samples are the
// right-continuous embedded states at the grid. Deterministic given
// (inputs, seed, stream).
inline ZrpPath simulate_zrp(const ChainModel<double>& chain,
                            const JumpRateFamily& g, const ZrpState& eta0,
                            const Eigen::VectorXd& sample_grid,
                            std::uint64_t seed, std::uint64_t stream = 0,
                            std::uint64_t max_events = 1'000'000'000ULL) {
  const int p = chain.sites();
  if (eta0.total == 0) throw EmptyConfig("configuration has no particles");
  if (sample_grid.size() == 0) throw Error("empty sample grid");
  for (int s = 1; s < sample_grid.size(); ++s)
    if (!(sample_grid(s) > sample_grid(s - 1)))
      throw Error("sample grid must be strictly increasing");
  if (sample_grid(0) < 0.0) throw Error("sample grid must start at t >= 0");

  const double n2 = static_cast<double>(eta0.total) *
                    static_cast<double>(eta0.total);
  const double horizon = sample_grid(sample_grid.size() - 1) * n2;

  ZrpPath path;
  path.seed = seed;
  path.stream = stream;
  path.sample_times = sample_grid;
  path.points.resize(sample_grid.size(), p);

  CounterRng rng(seed, stream);
  Eigen::VectorXi eta = eta0.eta;
  Eigen::VectorXd emit(p);  // per-site emission rate g_i(eta_i) lambda_i
  for (int i = 0; i < p; ++i) emit(i) = g.rate(i, eta(i)) * chain.holding(i);

  double clock = 0.0;  // chain time
  int next_sample = 0;
  auto record_through = [&](double until) {
    while (next_sample < sample_grid.size() &&
           sample_grid(next_sample) * n2 < until) {
      path.points.row(next_sample) =
          eta.cast<double>() / static_cast<double>(eta0.total);
      ++next_sample;
    }
  };

  while (true) {
    const double total_rate = emit.sum();
    // total_rate > 0 always: some site holds a particle and the chain is
    // irreducible, so g_i(eta_i) lambda_i > 0 there.
    const double wait = rng.exponential(total_rate);
    const double event_time = clock + wait;
    if (event_time > horizon) {
      record_through(horizon + 1.0);  // state holds to the end of the grid
      break;
    }
    record_through(event_time);

    if (path.events >= max_events)
      throw HorizonOverflow("event cap exceeded; N^2 T too large");
    ++path.events;

    // pick the emitting site proportionally to g_i(eta_i) lambda_i
    double pick = rng.uniform() * total_rate;
    int from = -1;
    for (int i = 0; i < p; ++i) {
      if (emit(i) <= 0.0) continue;
      pick -= emit(i);
      from = i;
      if (pick < 0.0) break;
    }
    // pick the destination proportionally to r(from, j)
    double jump = rng.uniform() * chain.holding(from);
    int to = -1;
    for (int j = 0; j < p; ++j) {
      if (chain.rates(from, j) <= 0.0) continue;
      jump -= chain.rates(from, j);
      to = j;
      if (jump < 0.0) break;
    }

    eta(from) -= 1;
    eta(to) += 1;
    emit(from) = g.rate(from, eta(from)) * chain.holding(from);
    emit(to) = g.rate(to, eta(to)) * chain.holding(to);
    clock = event_time;
  }
  return path;
}

}  // namespace zrdiff
