#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbi/classify.hpp"
#include "cbi/cutout.hpp"
#include "cbi/flow.hpp"
#include "cbi/mechanism_grammar.hpp"
#include "cbi/ou.hpp"
#include "cbi/report.hpp"
#include "cbi/stats.hpp"
#include "cbi/zeroset.hpp"

namespace cbi::cli {

inline constexpr const char* kReportDirEnv = "CBIZERO_REPORT_DIR";

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string command;
  std::string psi_spec;
  std::string phi_spec;
  // Library callers may hand over mechanisms directly (e.g. custom ones);
  // these take precedence over the spec strings.
  std::optional<BranchingMechanism> psi;
  std::optional<ImmigrationMechanism> phi;

  std::optional<double> T;
  std::optional<double> eps;
  std::int64_t reps = 1;
  std::optional<std::uint64_t> seed;
  std::vector<double> q_list;
  std::vector<double> t_list;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::size_t ks_samples = 10000;

  std::string out;
  std::string format = "json";
  bool dump_intervals = false;
  unsigned threads = 0;

  bool stochastic() const { return command == "simulate" || command == "ou"; }

  void validate() const {
    static const std::vector<std::string> known{"classify", "vflow", "laplace", "gzero", "simulate", "ou"};
    if (std::find(known.begin(), known.end(), command) == known.end()) {
      throw ConfigError("unknown command '" + command + "'");
    }
    if (format != "json" && format != "csv") throw ConfigError("format must be json or csv");
    const bool needs_psi = command != "ou";
    const bool needs_phi = command != "ou" && command != "vflow";
    if (needs_psi && !psi && psi_spec.empty()) throw ConfigError(command + " needs --psi");
    if (needs_phi && !phi && phi_spec.empty()) throw ConfigError(command + " needs --phi");
    if ((command == "vflow" || command == "gzero") && t_list.empty()) throw ConfigError(command + " needs --t");
    if (command == "laplace" && q_list.empty()) throw ConfigError("laplace needs --q");
    if (command == "ou" && !alpha) throw ConfigError("ou needs --alpha");
    if (stochastic()) {
      if (!seed) throw ConfigError(command + " needs --seed");
      if (reps < 1) throw ConfigError("reps must be >= 1");
      if (!T || !(*T > 0.0) || !std::isfinite(*T)) throw ConfigError("T must be positive and finite");
      if (!eps || !(*eps > 0.0) || !(*eps <= *T / 10.0)) throw ConfigError("eps must lie in (0, T/10]");
      if (ks_samples < 10) throw ConfigError("ks_samples must be >= 10");
    }
  }
};

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    try {
      out.push_back(std::stod(item, &pos));
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "'");
    }
    if (item.find_first_not_of(" \t", pos) != std::string::npos) throw ConfigError("bad number '" + item + "'");
  }
  return out;
}

/// Flat `key = value` file; '#' starts a comment.
inline std::map<std::string, std::string> read_flat_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline void apply(ExperimentConfig& c, const std::map<std::string, std::string>& kv) {
  auto num = [](const std::string& k, const std::string& v) {
    const auto xs = parse_list(v);
    if (xs.size() != 1) throw ConfigError(k + " expects one number");
    return xs.front();
  };
  for (const auto& [k, v] : kv) {
    if (k == "command") c.command = v;
    else if (k == "psi") c.psi_spec = v;
    else if (k == "phi") c.phi_spec = v;
    else if (k == "T") c.T = num(k, v);
    else if (k == "eps") c.eps = num(k, v);
    else if (k == "reps") c.reps = std::stoll(v);
    else if (k == "seed") c.seed = std::stoull(v);
    else if (k == "q") c.q_list = parse_list(v);
    else if (k == "t") c.t_list = parse_list(v);
    else if (k == "lambda") c.lambda = num(k, v);
    else if (k == "alpha") c.alpha = num(k, v);
    else if (k == "ks_samples") c.ks_samples = std::stoull(v);
    else if (k == "out") c.out = v;
    else if (k == "format") c.format = v;
    else if (k == "dump_intervals") c.dump_intervals = (v == "1" || v == "true");
    else if (k == "threads") c.threads = static_cast<unsigned>(std::stoul(v));
    else throw ConfigError("unknown config key '" + k + "'");
  }
}

namespace detail {

using report::fmt;
using report::json;
using report::num;

struct Output {
  std::string text;
  int code = 0;
};

inline BranchingMechanism psi_of(const ExperimentConfig& c) { return c.psi ? *c.psi : parse_branching(c.psi_spec); }
inline ImmigrationMechanism phi_of(const ExperimentConfig& c) {
  return c.phi ? *c.phi : parse_immigration(c.phi_spec);
}

inline std::string rows_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string s = report::csv_row(header);
  for (const auto& r : rows) {
    std::vector<std::string> cells;
    for (double x : r) cells.push_back(fmt(x));
    s += report::csv_row(cells);
  }
  return s;
}

inline std::string rows_json(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json o;
    for (std::size_t i = 0; i < header.size(); ++i) o[header[i]] = num(r[i]);
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

inline std::string table(const ExperimentConfig& c, const std::vector<std::string>& header,
                         const std::vector<std::vector<double>>& rows) {
  return c.format == "csv" ? rows_csv(header, rows) : rows_json(header, rows);
}

inline Output classify(const ExperimentConfig& c) {
  const auto rep = classify_zero_state(psi_of(c), phi_of(c));
  Output o;
  o.text = c.format == "csv" ? report::to_csv(rep) : report::to_json(rep).dump(2) + "\n";
  o.code = rep.zero_class == ZeroClass::Inconclusive ? 2 : 0;
  return o;
}

inline Output vflow(const ExperimentConfig& c) {
  const FlowSolver flow(psi_of(c));
  std::vector<std::vector<double>> rows;
  for (double t : c.t_list) {
    std::vector<double> r{t, flow.v_from_infinity(t)};
    if (c.lambda) r.push_back(flow.v_from_lambda(t, *c.lambda));
    rows.push_back(std::move(r));
  }
  std::vector<std::string> h{"t", "v_t"};
  if (c.lambda) h.push_back("v_t_lambda");
  return {table(c, h, rows), 0};
}

inline Output laplace(const ExperimentConfig& c) {
  const auto psi = psi_of(c);
  const auto phi = phi_of(c);
  std::vector<std::vector<double>> rows;
  for (double q : c.q_list) rows.push_back({q, laplace_exponent(psi, phi, q)});
  return {table(c, {"q", "L"}, rows), 0};
}

inline Output gzero(const ExperimentConfig& c) {
  const GzeroLaw law(psi_of(c), phi_of(c));
  const auto cdf = law.cdf(c.t_list);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < c.t_list.size(); ++i) rows.push_back({c.t_list[i], law.density(c.t_list[i]), cdf[i]});
  return {table(c, {"t", "density", "cdf"}, rows), 0};
}

struct ReplicateRow {
  std::uint64_t seed = 0;
  double lebesgue = 0.0;
  double g_last = 0.0;
  double dim_fit = 0.0;
};

inline json summary_stats(const std::vector<double>& x) {
  return {{"mean", num(stats::mean(x))}, {"sd", num(stats::stddev(x))}};
}

inline Output simulate(const ExperimentConfig& c, const std::string& path) {
  const auto psi = psi_of(c);
  const auto phi = phi_of(c);
  const auto rep = classify_zero_state(psi, phi);
  const auto sampler = DurationSampler::for_pair(psi, phi, *c.eps);
  const auto grid = default_grid(*c.T, *c.eps);
  const auto rows = run_replicates(
      static_cast<std::size_t>(c.reps), *c.seed,
      [&](std::size_t, std::uint64_t s) {
        const auto z = sample_cutout(sampler, *c.T, s);
        const auto st = statistics(z, grid);
        return ReplicateRow{s, st.lebesgue, st.g_last, st.dim_fit.slope};
      },
      c.threads);
  std::string csv = "seed,lebesgue,g_last,dim_fit\n";
  std::vector<double> leb, gl, dim;
  for (const auto& r : rows) {
    csv += std::to_string(r.seed) + ',' + fmt(r.lebesgue) + ',' + fmt(r.g_last) + ',' + fmt(r.dim_fit) + '\n';
    leb.push_back(r.lebesgue);
    gl.push_back(r.g_last);
    dim.push_back(r.dim_fit);
  }
  json s;
  s["psi"] = c.psi ? json(nullptr) : json(c.psi_spec);
  s["phi"] = c.phi ? json(nullptr) : json(c.phi_spec);
  s["T"] = num(*c.T);
  s["eps"] = num(*c.eps);
  s["reps"] = c.reps;
  s["seed"] = *c.seed;
  s["zero_class"] = to_string(rep.zero_class);
  s["dim_upper"] = num(rep.dim_upper);
  s["dim_lower"] = num(rep.dim_lower);
  s["grid"] = json::array();
  for (double g : grid) s["grid"].push_back(num(g));
  s["lebesgue"] = summary_stats(leb);
  s["g_last"] = summary_stats(gl);
  s["dim_fit"] = summary_stats(dim);
  const std::string summary = s.dump(2) + "\n";

  if (path.empty()) return {csv, 0};
  std::ofstream(path) << csv;
  std::ofstream(path + ".summary.json") << summary;
  if (c.dump_intervals) {
    std::ofstream(path + ".intervals.csv") << report::intervals_csv(sample_cutout(sampler, *c.T, rows[0].seed));
  }
  return {summary, 0};
}

inline std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return fmt(v.get<double>());
  return v.dump();
}

inline Output ou(const ExperimentConfig& c) {
  const auto cls = ou_classify(*c.alpha);
  json j;
  j["class"] = to_string(cls.cls);
  j["alpha"] = num(*c.alpha);
  j["recurrent"] = cls.recurrent;
  j["dim_theory"] = num(cls.dim_theory);
  j["dim_density"] = num(cls.dim_density);
  if (cls.cls == OuClass::TrivialPoint) {
    j["dim_fit"] = nullptr;
    j["ks_pushforward"] = nullptr;
  } else {
    const auto sampler = ou_duration_sampler(*c.alpha, *c.eps);
    const auto grid = default_grid(*c.T, *c.eps);
    const auto dims = run_replicates(
        static_cast<std::size_t>(c.reps), *c.seed,
        [&](std::size_t, std::uint64_t s) { return statistics(sample_cutout(sampler, *c.T, s), grid).dim_fit.slope; },
        c.threads);
    const double zmin = *c.eps;
    const auto z = pushforward_samples(*c.alpha, c.ks_samples, zmin, derive_seed(*c.seed, ~std::uint64_t{0}));
    const double a = *c.alpha;
    const auto ks = stats::ks_one_sample(z, [&](double x) { return 1.0 - cutting_tail(x, a) / cutting_tail(zmin, a); });
    j["dim_fit"] = num(stats::mean(dims));
    j["dim_fit_sd"] = num(stats::stddev(dims));
    j["ks_pushforward"] = num(ks.statistic);
    j["ks_p_value"] = num(ks.p_value);
    j["T"] = num(*c.T);
    j["eps"] = num(*c.eps);
    j["reps"] = c.reps;
    j["seed"] = *c.seed;
  }
  if (c.format == "csv") {
    std::vector<std::string> keys, vals;
    for (auto& [k, v] : j.items()) {
      keys.push_back(k);
      vals.push_back(cell(v));
    }
    return {report::csv_row(keys) + report::csv_row(vals), 0};
  }
  return {j.dump(2) + "\n", 0};
}

inline std::string default_path(const ExperimentConfig& c) {
  if (!c.out.empty()) return c.out;
  const char* dir = std::getenv(kReportDirEnv);
  if (!dir || !*dir) return {};
  const std::string ext = c.command == "simulate" ? "csv" : c.format;
  return (std::filesystem::path(dir) / (c.command + "." + ext)).string();
}

}  // namespace detail

/// Runs one command. Exit codes: 0 success, 1 invalid input or domain error,
/// 2 honest Inconclusive classification.
inline int run(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  try {
    c.validate();
    const std::string path = detail::default_path(c);
    detail::Output o;
    if (c.command == "classify") o = detail::classify(c);
    else if (c.command == "vflow") o = detail::vflow(c);
    else if (c.command == "laplace") o = detail::laplace(c);
    else if (c.command == "gzero") o = detail::gzero(c);
    else if (c.command == "simulate") o = detail::simulate(c, path);
    else o = detail::ou(c);
    out << o.text;
    if (!path.empty() && c.command != "simulate") {
      std::ofstream f(path);
      if (!f) throw std::runtime_error("cannot write " + path);
      f << o.text;
    }
    return o.code;
  } catch (const std::exception& e) {
    err << "cbizero: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cbi::cli
