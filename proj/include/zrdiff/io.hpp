#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zrdiff/chain.hpp"
#include "zrdiff/diffusion.hpp"
#include "zrdiff/errors.hpp"
#include "zrdiff/harness.hpp"
#include "zrdiff/numeric_policy.hpp"
#include "zrdiff/superharmonic.hpp"
#include "zrdiff/trace.hpp"
#include "zrdiff/zrp.hpp"

namespace zrdiff {

// Shortest round-trip decimal form; identical bytes on reruns.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw Error("bad number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

// ---- chain config -------------------------------------------------------

struct ChainConfig {
  Eigen::MatrixXd rates;
  double b = 1.0;
};

inline ChainConfig chain_config_from_json(const nlohmann::json& j) {
  for (const auto& [key, _] : j.items())
    if (key != "rates" && key != "b")
      throw Error("unknown key in chain config: '" + key + "'");
  if (!j.contains("rates")) throw Error("chain config needs \"rates\"");

  const auto& rows = j.at("rates");
  const int p = static_cast<int>(rows.size());
  ChainConfig cfg;
  cfg.rates.resize(p, p);
  for (int i = 0; i < p; ++i) {
    if (static_cast<int>(rows[i].size()) != p)
      throw Error("rate matrix must be square");
    for (int k = 0; k < p; ++k) {
      const double v = rows[i][k].get<double>();
      if (v < 0.0) throw Error("negative jump rate in chain config");
      if (i == k && v != 0.0)
        throw NonzeroDiagonal("nonzero diagonal in chain config");
      cfg.rates(i, k) = v;
    }
  }
  cfg.b = j.value("b", 1.0);
  return cfg;
}

inline ChainConfig load_chain_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open chain config: " + path);
  nlohmann::json j;
  in >> j;
  return chain_config_from_json(j);
}

inline NumericPolicy load_numeric_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open numeric policy: " + path);
  nlohmann::json j;
  in >> j;
  NumericPolicy policy;
  for (const auto& [key, value] : j.items()) {
    if (key == "algebra_tol") policy.algebra_tol = value.get<double>();
    else if (key == "residual_tol") policy.residual_tol = value.get<double>();
    else if (key == "estimate_tol") policy.estimate_tol = value.get<double>();
    else if (key == "support_tol") policy.support_tol = value.get<double>();
    else throw Error("unknown key in numeric policy: '" + key + "'");
  }
  return policy;
}

// ---- CSV trajectories ---------------------------------------------------

// Key=value tokens of the '#' header lines. The header carries the seed
// and run parameters and contains nothing volatile, so reruns are
// byte-identical.
using CsvHeader = std::map<std::string, std::string>;

inline void write_header(std::ofstream& out, const std::string& kind,
                         const CsvHeader& fields) {
  out << "# zrdiff " << kind;
  for (const auto& [k, v] : fields) out << ' ' << k << '=' << v;
  out << '\n';
}

inline CsvHeader read_header(std::istream& in, std::string& first_data_line) {
  CsvHeader header;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != '#') {
      first_data_line = line;
      return header;
    }
    for (const auto& token : split(line.substr(1), ' ')) {
      const auto eq = token.find('=');
      if (eq != std::string::npos)
        header[token.substr(0, eq)] = token.substr(eq + 1);
    }
  }
  first_data_line.clear();
  return header;
}

inline void write_zrp_csv(const std::string& path,
                          const std::vector<ZrpPath>& paths, long n,
                          std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output: " + path);
  const int p = static_cast<int>(paths.front().points.cols());
  write_header(out, "simulate-zrp",
               {{"seed", std::to_string(seed)},
                {"n", std::to_string(n)},
                {"p", std::to_string(p)},
                {"replicas", std::to_string(paths.size())}});
  out << "replica,time";
  for (int c = 0; c < p; ++c) out << ",x_" << (c + 1);
  out << '\n';
  for (std::size_t r = 0; r < paths.size(); ++r)
    for (int s = 0; s < paths[r].sample_times.size(); ++s) {
      out << r << ',' << format_double(paths[r].sample_times(s));
      for (int c = 0; c < p; ++c)
        out << ',' << format_double(paths[r].points(s, c));
      out << '\n';
    }
}

struct LoadedZrp {
  long n = 0;
  std::uint64_t seed = 0;
  Ensemble ensemble;
};

inline LoadedZrp read_zrp_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open input: " + path);
  std::string column_line;
  const CsvHeader header = read_header(in, column_line);
  LoadedZrp loaded;
  if (header.count("n")) loaded.n = std::stol(header.at("n"));
  if (header.count("seed")) loaded.seed = std::stoull(header.at("seed"));
  if (loaded.n <= 0) throw Error("zrp csv missing n= header: " + path);

  std::vector<double> times;
  std::vector<std::vector<double>> rows;  // flattened per data row
  std::vector<long> replica_of;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    replica_of.push_back(std::stol(cells[0]));
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c)
      row.push_back(parse_double(cells[c]));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("no data rows in " + path);
  const int p = static_cast<int>(rows.front().size()) - 1;

  // grid = times of the first replica, in file order
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (replica_of[i] == replica_of[0]) times.push_back(rows[i][0]);
  const int samples = static_cast<int>(times.size());
  loaded.ensemble.times =
      Eigen::Map<Eigen::VectorXd>(times.data(), samples);

  Eigen::MatrixXd current(samples, p);
  int cursor = 0;
  long current_replica = replica_of[0];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (replica_of[i] != current_replica) {
      if (cursor != samples) throw Error("ragged replica block in " + path);
      loaded.ensemble.paths.push_back(current);
      cursor = 0;
      current_replica = replica_of[i];
    }
    for (int c = 0; c < p; ++c) current(cursor, c) = rows[i][static_cast<std::size_t>(c) + 1];
    ++cursor;
  }
  if (cursor != samples) throw Error("ragged replica block in " + path);
  loaded.ensemble.paths.push_back(current);
  return loaded;
}

inline void write_diffusion_csv(const std::string& path,
                                const std::vector<DiffusionPath>& paths,
                                std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output: " + path);
  const int p = static_cast<int>(paths.front().points.cols());
  write_header(out, "simulate-diffusion",
               {{"seed", std::to_string(seed)},
                {"p", std::to_string(p)},
                {"replicas", std::to_string(paths.size())}});
  out << "replica,time";
  for (int c = 0; c < p; ++c) out << ",x_" << (c + 1);
  out << ",face\n";
  for (std::size_t r = 0; r < paths.size(); ++r)
    for (int s = 0; s < paths[r].sample_times.size(); ++s) {
      out << r << ',' << format_double(paths[r].sample_times(s));
      for (int c = 0; c < p; ++c)
        out << ',' << format_double(paths[r].points(s, c));
      out << ',' << paths[r].face_at_sample[static_cast<std::size_t>(s)] << '\n';
    }
}

inline void write_absorptions_csv(const std::string& path,
                                  const std::vector<DiffusionPath>& paths,
                                  std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output: " + path);
  write_header(out, "absorptions",
               {{"seed", std::to_string(seed)},
                {"replicas", std::to_string(paths.size())}});
  out << "replica,n,sigma_n,face\n";
  for (std::size_t r = 0; r < paths.size(); ++r) {
    const auto& rec = paths[r].record;
    for (std::size_t k = 0; k < rec.sigmas.size(); ++k)
      out << r << ',' << (k + 1) << ',' << format_double(rec.sigmas[k]) << ','
          << rec.faces[k + 1] << '\n';
  }
}

struct LoadedDiffusion {
  std::uint64_t seed = 0;
  std::vector<DiffusionPath> paths;

  Ensemble ensemble() const { return to_ensemble(paths); }
};

inline LoadedDiffusion read_diffusion_csv(const std::string& path,
                                          const std::string& absorptions_path =
                                              std::string()) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open input: " + path);
  std::string column_line;
  const CsvHeader header = read_header(in, column_line);
  LoadedDiffusion loaded;
  if (header.count("seed")) loaded.seed = std::stoull(header.at("seed"));

  const auto columns = split(column_line, ',');
  const int p = static_cast<int>(columns.size()) - 3;  // replica,time,...,face
  if (p < 1) throw Error("unexpected diffusion csv columns in " + path);

  std::string line;
  DiffusionPath current;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<FaceMask> faces;
  long current_replica = -1;

  auto flush = [&]() {
    if (times.empty()) return;
    current.sample_times =
        Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<int>(times.size()));
    current.points.resize(static_cast<int>(states.size()), p);
    for (std::size_t s = 0; s < states.size(); ++s)
      current.points.row(static_cast<int>(s)) = states[s];
    current.face_at_sample = faces;
    current.record.faces = {full_face(p)};
    loaded.paths.push_back(current);
    current = DiffusionPath{};
    times.clear();
    states.clear();
    faces.clear();
  };

  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    const long replica = std::stol(cells[0]);
    if (replica != current_replica) {
      flush();
      current_replica = replica;
    }
    times.push_back(parse_double(cells[1]));
    Eigen::VectorXd x(p);
    for (int c = 0; c < p; ++c) x(c) = parse_double(cells[static_cast<std::size_t>(c) + 2]);
    states.push_back(x);
    faces.push_back(static_cast<FaceMask>(std::stoul(cells.back())));
  }
  flush();

  if (!absorptions_path.empty()) {
    std::ifstream abs_in(absorptions_path);
    if (!abs_in) throw Error("cannot open input: " + absorptions_path);
    std::string first;
    read_header(abs_in, first);
    while (std::getline(abs_in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto cells = split(line, ',');
      const auto replica = static_cast<std::size_t>(std::stol(cells[0]));
      if (replica >= loaded.paths.size())
        throw Error("absorptions refer to unknown replica");
      auto& rec = loaded.paths[replica].record;
      rec.sigmas.push_back(parse_double(cells[2]));
      rec.faces.push_back(static_cast<FaceMask>(std::stoul(cells[3])));
      if (face_size(rec.faces.back()) == 1)
        rec.terminal = face_sites(rec.faces.back()).front();
    }
  }
  return loaded;
}

// ---- JSON reports -------------------------------------------------------

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline nlohmann::json sites_to_json(const std::vector<int>& sites) {
  nlohmann::json out = nlohmann::json::array();
  for (int s : sites) out.push_back(s + 1);  // 1-based site labels
  return out;
}

inline nlohmann::json trace_report_json(const TraceModel<double>& trace) {
  nlohmann::json j;
  j["face"] = sites_to_json(trace.face);
  j["u"] = matrix_to_json(trace.potentials);
  j["rB"] = matrix_to_json(trace.rates);
  j["lambdaB"] = vector_to_json(trace.holding);
  j["gamma"] = matrix_to_json(trace.projection);
  j["vB"] = matrix_to_json(trace.face_drift);
  return j;
}

inline nlohmann::json ci_to_json(const BootstrapCi& ci) {
  return {{"estimate", ci.estimate}, {"se", ci.se}, {"lo", ci.lo}, {"hi", ci.hi}};
}

inline nlohmann::json comparison_report_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["checkpoints"] = report.checkpoints;
  j["n_values"] = report.ns;
  j["final_threshold"] = report.final_threshold;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& d : report.distances) {
    nlohmann::json e;
    e["n"] = d.n;
    e["t"] = d.checkpoint;
    nlohmann::json w1 = nlohmann::json::array();
    for (const auto& ci : d.w1) w1.push_back(ci_to_json(ci));
    e["w1"] = w1;
    e["w1_null95"] = d.w1_null95;
    e["energy"] = ci_to_json(d.energy);
    entries.push_back(e);
  }
  j["distances"] = entries;
  j["verdicts"] = {{"converging", report.converging},
                   {"below_threshold", report.below_threshold},
                   {"notes", report.verdict_notes}};
  return j;
}

inline nlohmann::json supharm_report_json(const SupharmReport& report,
                                          double tol) {
  nlohmann::json j;
  j["M"] = report.region.M;
  j["lambda"] = report.region.lambda;
  j["epsilon"] = report.region.epsilon;
  j["empty_region"] = report.empty_region;
  j["max_value"] = report.max_value;
  j["grid_points"] = report.points;
  j["tolerance"] = tol;
  j["pass"] = report.pass(tol);
  // the constant M is maximized over faces; per-face constants can be
  // smaller, so the region is sufficient but possibly conservative
  j["conservative_M"] = report.conservative_M;
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& f : report.faces)
    faces.push_back({{"face", sites_to_json(face_sites(f.face))},
                     {"points", f.points},
                     {"max_value", f.max_value}});
  j["faces"] = faces;
  return j;
}

inline nlohmann::json absorption_stats_json(const AbsorptionStats& stats) {
  nlohmann::json j;
  j["sigma1_mean"] = stats.sigma1.mean;
  j["sigma1_se"] = stats.sigma1.se;
  j["sigma1_median"] = stats.sigma1_median;
  j["sigma1_q90"] = stats.sigma1_q90;
  j["fraction_terminal"] = stats.fraction_terminal;
  j["multi_collapse_fraction"] = stats.multi_collapse_fraction;
  j["bound"] = stats.bound;
  j["bound_q"] = stats.bound_q;
  // summing per-stage bounds is a heuristic envelope, not a proved bound
  j["stage_bound_sum_heuristic"] = stats.stage_bound_sum;
  j["violated"] = stats.violated;
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace zrdiff
