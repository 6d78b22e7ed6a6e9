#pragma once

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zrdiff/chain.hpp"
#include "zrdiff/diffusion.hpp"
#include "zrdiff/errors.hpp"
#include "zrdiff/harness.hpp"
#include "zrdiff/io.hpp"
#include "zrdiff/parallel.hpp"
#include "zrdiff/superharmonic.hpp"
#include "zrdiff/trace.hpp"
#include "zrdiff/zrp.hpp"

namespace zrdiff {

namespace cli_detail {

// "0:0.01:1" (start:step:end, end included up to rounding) or "0,0.1,0.5"
inline Eigen::VectorXd parse_grid(const std::string& text) {
  std::vector<double> values;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw Error("grid must be start:step:end");
    const double start = parse_double(parts[0]);
    const double step = parse_double(parts[1]);
    const double end = parse_double(parts[2]);
    if (!(step > 0.0) || end < start) throw Error("bad grid range");
    for (long k = 0;; ++k) {
      const double t = start + step * static_cast<double>(k);
      if (t > end + 0.5 * step) break;
      values.push_back(std::min(t, end));
    }
    if (std::abs(values.back() - end) > 1e-12) values.push_back(end);
  } else {
    for (const auto& cell : split(text, ',')) values.push_back(parse_double(cell));
  }
  Eigen::VectorXd grid(static_cast<int>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) grid(static_cast<int>(i)) = values[i];
  return grid;
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  for (const auto& cell : split(text, ',')) values.push_back(parse_double(cell));
  return values;
}

// 1-based site labels on the command line, 0-based internally
inline std::vector<int> parse_sites(const std::string& text, int p) {
  std::vector<int> sites;
  for (const auto& cell : split(text, ',')) {
    const int label = std::stoi(cell);
    if (label < 1 || label > p) throw Error("site label out of range: " + cell);
    sites.push_back(label - 1);
  }
  std::sort(sites.begin(), sites.end());
  for (std::size_t k = 1; k < sites.size(); ++k)
    if (sites[k] == sites[k - 1]) throw Error("duplicate site label");
  return sites;
}

inline Eigen::VectorXd parse_point(const std::string& text, int p) {
  const auto values = parse_list(text);
  if (static_cast<int>(values.size()) != p)
    throw Error("point needs exactly " + std::to_string(p) + " coordinates");
  Eigen::VectorXd x(p);
  for (int i = 0; i < p; ++i) x(i) = values[static_cast<std::size_t>(i)];
  if ((x.array() < 0.0).any() || std::abs(x.sum() - 1.0) > 1e-9)
    throw Error("point must lie on the simplex");
  return x / x.sum();
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"condensing zero-range / dimension-decaying diffusion toolkit"};
  app.require_subcommand(1);

  int threads = default_threads();
  std::string policy_path;
  app.add_option("--threads", threads, "worker threads for replica runs");
  app.add_option("--numeric-policy", policy_path, "JSON tolerance overrides");

  // trace-rates
  auto* trace_cmd = app.add_subcommand("trace-rates", "trace parameters on a face");
  std::string trace_chain, trace_face, trace_out;
  trace_cmd->add_option("--chain", trace_chain, "chain config JSON")->required();
  trace_cmd->add_option("--face", trace_face, "face sites, e.g. 1,2")->required();
  trace_cmd->add_option("--out", trace_out, "output JSON (default stdout)");

  // simulate-zrp
  auto* zrp_cmd = app.add_subcommand("simulate-zrp", "rescaled zero-range ensemble");
  std::string zrp_chain, zrp_grid = "0:0.01:1", zrp_out, zrp_x0;
  long zrp_n = 0;
  double zrp_t = 1.0;
  int zrp_replicas = 1;
  std::uint64_t zrp_seed = 0, zrp_max_events = 1'000'000'000ULL;
  zrp_cmd->add_option("--chain", zrp_chain)->required();
  zrp_cmd->add_option("--n", zrp_n, "particle count")->required();
  zrp_cmd->add_option("--t", zrp_t, "rescaled horizon");
  zrp_cmd->add_option("--grid", zrp_grid, "sample grid start:step:end or list");
  zrp_cmd->add_option("--x0", zrp_x0, "initial density (default uniform)");
  zrp_cmd->add_option("--replicas", zrp_replicas);
  zrp_cmd->add_option("--seed", zrp_seed);
  zrp_cmd->add_option("--max-events", zrp_max_events, "event cap per replica");
  zrp_cmd->add_option("--out", zrp_out, "output CSV")->required();

  // simulate-diffusion
  auto* diff_cmd = app.add_subcommand("simulate-diffusion", "absorbed diffusion ensemble");
  std::string diff_chain, diff_x0, diff_grid, diff_out, diff_abs_out;
  double diff_t = 1.0, diff_dt = 1e-4, diff_eps = 1e-4;
  int diff_replicas = 1;
  std::uint64_t diff_seed = 0;
  diff_cmd->add_option("--chain", diff_chain)->required();
  diff_cmd->add_option("--x0", diff_x0, "start point")->required();
  diff_cmd->add_option("--t", diff_t, "horizon");
  diff_cmd->add_option("--dt", diff_dt, "base step");
  diff_cmd->add_option("--eps-abs", diff_eps, "absorption threshold");
  diff_cmd->add_option("--grid", diff_grid, "sample grid (default 0:t/200:t)");
  diff_cmd->add_option("--replicas", diff_replicas);
  diff_cmd->add_option("--seed", diff_seed);
  diff_cmd->add_option("--out", diff_out, "trajectory CSV")->required();
  diff_cmd->add_option("--out-absorptions", diff_abs_out,
                       "companion CSV (default absorptions.csv beside --out)");

  // verify-superharmonic
  auto* sup_cmd = app.add_subcommand("verify-superharmonic",
                                     "sign check of the superharmonic family");
  std::string sup_chain, sup_a, sup_d, sup_out;
  double sup_gamma = 0.5, sup_eps = 0.2, sup_lambda_override = 0.0;
  int sup_grid = 25;
  sup_cmd->add_option("--chain", sup_chain)->required();
  sup_cmd->add_option("--a", sup_a, "vanishing block A")->required();
  sup_cmd->add_option("--d", sup_d, "free block D")->required();
  sup_cmd->add_option("--gamma", sup_gamma);
  sup_cmd->add_option("--eps", sup_eps);
  sup_cmd->add_option("--grid-density", sup_grid, "grid points per free dimension");
  sup_cmd->add_option("--lambda-override", sup_lambda_override,
                      "diagnostic: replace the computed lambda");
  sup_cmd->add_option("--out", sup_out, "output JSON (default stdout)");

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "ZRP-vs-diffusion marginal distances");
  std::vector<std::string> cmp_zrp;
  std::string cmp_diff, cmp_checkpoints, cmp_out;
  int cmp_resamples = 1000;
  std::uint64_t cmp_seed = 0;
  cmp_cmd->add_option("--zrp", cmp_zrp, "zero-range CSVs (one per N)")
      ->required()
      ->expected(-1);
  cmp_cmd->add_option("--diff", cmp_diff, "diffusion CSV")->required();
  cmp_cmd->add_option("--checkpoints", cmp_checkpoints, "times, e.g. 0.1,0.5")
      ->required();
  cmp_cmd->add_option("--resamples", cmp_resamples);
  cmp_cmd->add_option("--seed", cmp_seed, "bootstrap seed");
  cmp_cmd->add_option("--out", cmp_out, "report JSON")->required();

  // absorption-stats
  auto* abs_cmd = app.add_subcommand("absorption-stats",
                                     "absorption-time summary vs the bound");
  std::string abs_chain, abs_diff, abs_abs, abs_qgrid = "1.5,2,3,4", abs_out;
  abs_cmd->add_option("--chain", abs_chain)->required();
  abs_cmd->add_option("--diff", abs_diff, "diffusion CSV")->required();
  abs_cmd->add_option("--absorptions", abs_abs, "absorptions CSV")->required();
  abs_cmd->add_option("--q-grid", abs_qgrid);
  abs_cmd->add_option("--out", abs_out, "output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    NumericPolicy policy;
    if (!policy_path.empty()) policy = load_numeric_policy(policy_path);

    auto emit_json = [](const nlohmann::json& j, const std::string& out) {
      if (out.empty())
        std::cout << j.dump(2) << '\n';
      else
        write_json(out, j);
    };

    if (*trace_cmd) {
      const ChainConfig cfg = load_chain_config(trace_chain);
      const auto chain = build_chain<double>(cfg.rates, cfg.b, policy);
      const auto face = cli_detail::parse_sites(trace_face, chain.sites());
      const auto trace = trace_process(chain, face);
      emit_json(trace_report_json(trace), trace_out);
      return 0;
    }

    if (*zrp_cmd) {
      const ChainConfig cfg = load_chain_config(zrp_chain);
      const auto chain = build_chain<double>(cfg.rates, cfg.b, policy);
      Eigen::VectorXd x0 =
          zrp_x0.empty()
              ? Eigen::VectorXd::Constant(chain.sites(), 1.0 / chain.sites())
              : cli_detail::parse_point(zrp_x0, chain.sites());
      Eigen::VectorXd grid = cli_detail::parse_grid(zrp_grid);
      if (grid(grid.size() - 1) > zrp_t + 1e-12)
        throw Error("grid extends beyond the horizon");
      const ZrpState eta0 = state_from_point(x0, zrp_n);
      const JumpRateFamily g = default_rates(chain);
      std::vector<ZrpPath> paths(static_cast<std::size_t>(zrp_replicas));
      parallel_for(paths.size(), threads, [&](std::size_t r) {
        paths[r] = simulate_zrp(chain, g, eta0, grid, zrp_seed, r, zrp_max_events);
      });
      write_zrp_csv(zrp_out, paths, zrp_n, zrp_seed);
      return 0;
    }

    if (*diff_cmd) {
      const ChainConfig cfg = load_chain_config(diff_chain);
      const auto chain = build_chain<double>(cfg.rates, cfg.b, policy);
      const Eigen::VectorXd x0 = cli_detail::parse_point(diff_x0, chain.sites());
      Eigen::VectorXd grid =
          diff_grid.empty()
              ? cli_detail::parse_grid("0:" + format_double(diff_t / 200.0) +
                                       ":" + format_double(diff_t))
              : cli_detail::parse_grid(diff_grid);
      DiffusionControls controls;
      controls.dt_base = diff_dt;
      controls.eps_abs = diff_eps;
      const FaceDynamicsCache cache(chain);
      std::vector<DiffusionPath> paths(static_cast<std::size_t>(diff_replicas));
      parallel_for(paths.size(), threads, [&](std::size_t r) {
        paths[r] = simulate_diffusion(chain, cache, x0, grid, controls,
                                      diff_seed, r);
      });
      write_diffusion_csv(diff_out, paths, diff_seed);
      std::string abs_path = diff_abs_out;
      if (abs_path.empty()) {
        const auto slash = diff_out.find_last_of('/');
        abs_path = (slash == std::string::npos)
                       ? "absorptions.csv"
                       : diff_out.substr(0, slash + 1) + "absorptions.csv";
      }
      write_absorptions_csv(abs_path, paths, diff_seed);
      return 0;
    }

    if (*sup_cmd) {
      const ChainConfig cfg = load_chain_config(sup_chain);
      const auto chain = build_chain<double>(cfg.rates, cfg.b, policy);
      SupharmSpec spec;
      spec.block = cli_detail::parse_sites(sup_a, chain.sites());
      spec.gamma = sup_gamma;
      spec.b = chain.b;
      const auto free_block = cli_detail::parse_sites(sup_d, chain.sites());
      const SupharmReport report = verify_supharmonic(
          spec, chain, free_block, sup_eps, sup_grid, sup_lambda_override);
      emit_json(supharm_report_json(report, policy.residual_tol), sup_out);
      if (!report.pass(policy.residual_tol)) {
        std::cerr << "superharmonic sign contract violated: max value "
                  << report.max_value << '\n';
        return 2;
      }
      return 0;
    }

    if (*cmp_cmd) {
      std::map<int, Ensemble> by_n;
      for (const auto& path : cmp_zrp) {
        LoadedZrp loaded = read_zrp_csv(path);
        by_n[static_cast<int>(loaded.n)] = std::move(loaded.ensemble);
      }
      const LoadedDiffusion diff = read_diffusion_csv(cmp_diff);
      CompareOptions opts;
      opts.bootstrap_resamples = cmp_resamples;
      opts.seed = cmp_seed;
      opts.threads = threads;
      const ComparisonReport report = compare_laws(
          by_n, diff.ensemble(), cli_detail::parse_list(cmp_checkpoints), opts);
      write_json(cmp_out, comparison_report_json(report));
      return 0;
    }

    if (*abs_cmd) {
      const ChainConfig cfg = load_chain_config(abs_chain);
      const auto chain = build_chain<double>(cfg.rates, cfg.b, policy);
      const LoadedDiffusion diff = read_diffusion_csv(abs_diff, abs_abs);
      const AbsorptionStats stats =
          absorption_stats(diff.paths, chain, cli_detail::parse_list(abs_qgrid));
      emit_json(absorption_stats_json(stats), abs_out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace zrdiff
