#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cbi/cli.hpp"

using namespace cbi;
using cli::ExperimentConfig;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const ExperimentConfig& c) {
  std::ostringstream out, err;
  const int code = cli::run(c, out, err);
  return {code, out.str(), err.str()};
}

ExperimentConfig classify_cfg(std::string psi, std::string phi) {
  ExperimentConfig c;
  c.command = "classify";
  c.psi_spec = std::move(psi);
  c.phi_spec = std::move(phi);
  return c;
}

ExperimentConfig simulate_cfg() {
  ExperimentConfig c;
  c.command = "simulate";
  c.psi_spec = "stable:d=1,alpha=2";
  c.phi_spec = "stable:d=0.5,beta=1";
  c.T = 10.0;
  c.eps = 1e-4;
  c.reps = 3;
  c.seed = 12345;
  c.threads = 1;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("cbizero_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("validation errors exit with 1") {
  std::vector<std::pair<ExperimentConfig, std::string>> bad;
  {
    ExperimentConfig c;
    c.command = "frobnicate";
    bad.emplace_back(c, "unknown command");
  }
  {
    auto c = classify_cfg("stable:d=1,alpha=2", "stable:d=1,beta=1");
    c.format = "xml";
    bad.emplace_back(c, "format");
  }
  bad.emplace_back(classify_cfg("", "stable:d=1,beta=1"), "needs --psi");
  bad.emplace_back(classify_cfg("stable:d=1,alpha=2", ""), "needs --phi");
  {
    ExperimentConfig c;
    c.command = "vflow";
    c.psi_spec = "stable:d=1,alpha=2";
    bad.emplace_back(c, "needs --t");
  }
  {
    auto c = classify_cfg("stable:d=1,alpha=2", "stable:d=1,beta=1");
    c.command = "laplace";
    bad.emplace_back(c, "needs --q");
  }
  {
    ExperimentConfig c;
    c.command = "ou";
    bad.emplace_back(c, "needs --alpha");
  }
  {
    auto c = simulate_cfg();
    c.reps = 0;
    bad.emplace_back(c, "reps must be >= 1");
  }
  {
    auto c = simulate_cfg();
    c.seed.reset();
    bad.emplace_back(c, "needs --seed");
  }
  {
    auto c = simulate_cfg();
    c.eps = 2.0;
    bad.emplace_back(c, "eps must lie in (0, T/10]");
  }
  {
    auto c = simulate_cfg();
    c.T = std::numeric_limits<double>::infinity();
    bad.emplace_back(c, "T must be positive");
  }
  for (const auto& [cfg, msg] : bad) {
    const auto r = run(cfg);
    CAPTURE(msg, r.err);
    CHECK(r.code == 1);
    CHECK(r.out.empty());
    CHECK(r.err.rfind("cbizero: ", 0) == 0);
    CHECK(r.err.find(msg) != std::string::npos);
  }
}

TEST_CASE("grammar errors exit with 1 and name the position") {
  const auto r = run(classify_cfg("stable:d=1,alpha=2.5", "stable:d=1,beta=1"));
  CHECK(r.code == 1);
  CHECK(r.err.find("position 17") != std::string::npos);
  CHECK(run(classify_cfg("stable:alpha=0.9", "zero")).code == 1);
  CHECK(run(classify_cfg("stable:d=1,alpha=2", "weird:a=1")).code == 1);
}

TEST_CASE("classify JSON has the fixed keys in order") {
  const auto r = run(classify_cfg("stable:d=1,alpha=2", "stable:d=1,beta=1"));
  REQUIRE(r.code == 0);
  const auto j = report::json::parse(r.out);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"grey", "conservative", "zero_class", "heavy", "intervals", "stationary",
                                         "dim_upper", "dim_lower", "method", "evidence"});
  CHECK(j["zero_class"] == "Polar");
  CHECK(j["dim_upper"].is_null());

  const auto rec = report::json::parse(run(classify_cfg("stable:d=1,alpha=2", "stable:d=0.5,beta=1")).out);
  CHECK(rec["zero_class"] == "Recurrent");
  CHECK(rec["dim_upper"].get<double>() == Approx(0.5));
}

TEST_CASE("classify CSV") {
  auto c = classify_cfg("stable:d=1,alpha=2", "stable:d=1,beta=0.5");
  c.format = "csv";
  const auto r = run(c);
  REQUIRE(r.code == 0);
  const auto nl = r.out.find('\n');
  CHECK(r.out.substr(0, nl) == "grey,conservative,zero_class,heavy,intervals,stationary,dim_upper,dim_lower,method,evidence");
  CHECK(r.out.find("Transient") != std::string::npos);
}

TEST_CASE("inconclusive classification exits with 2 and keeps its evidence") {
  CustomBranching b;
  b.eval = [](double q) { return q * q; };
  CustomImmigration f;
  f.eval = [](double q) { return q * (1.0 - 1.0 / std::log(M_E + q)); };
  f.drift = 1.0;
  ExperimentConfig c;
  c.command = "classify";
  c.psi = BranchingMechanism::custom(b);
  c.phi = ImmigrationMechanism::custom(f);
  const auto r = run(c);
  CHECK(r.code == 2);
  const auto j = report::json::parse(r.out);
  CHECK(j["zero_class"] == "Inconclusive");
  CHECK_FALSE(j["evidence"].empty());
}

TEST_CASE("numeric tables") {
  ExperimentConfig c;
  c.command = "laplace";
  c.psi_spec = "stable:d=1,alpha=2";
  c.phi_spec = "stable:d=0.5,beta=1";
  c.q_list = {1.0, 4.0};
  c.format = "csv";
  auto r = run(c);
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "q,L");
  std::getline(in, line);
  CHECK(std::stod(line.substr(line.find(',') + 1)) == Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-6));

  c.command = "vflow";
  c.format = "json";
  c.t_list = {1.0, 0.25};
  c.lambda = 1.0;
  r = run(c);
  REQUIRE(r.code == 0);
  auto j = report::json::parse(r.out);
  CHECK(j[0]["v_t"].get<double>() == Approx(1.0));
  CHECK(j[1]["v_t"].get<double>() == Approx(4.0));
  CHECK(j[0]["v_t_lambda"].get<double>() == Approx(0.5));

  c.command = "gzero";
  c.phi_spec = "stable:d=1,beta=0.5";
  c.t_list = {1.0};
  r = run(c);
  REQUIRE(r.code == 0);
  j = report::json::parse(r.out);
  CHECK(j[0]["density"].get<double>() == Approx(2.0 * std::exp(-2.0)).epsilon(1e-8));
  CHECK(j[0]["cdf"].get<double>() == Approx(1.0 - 3.0 * std::exp(-2.0)).epsilon(1e-8));

  c.phi_spec = "stable:d=0.5,beta=1";  // recurrent: g_inf undefined
  r = run(c);
  CHECK(r.code == 1);
  CHECK(r.err.find("unbounded zero set") != std::string::npos);
}

TEST_CASE("floating output uses 12 significant digits") {
  CHECK(report::fmt(1.0 / 3.0) == "0.333333333333");
  CHECK(report::fmt(numerics::kInf) == "inf");
  CHECK(report::fmt(-numerics::kInf) == "-inf");
}

TEST_CASE("simulate is byte-identical per seed and thread count") {
  const auto a = run(simulate_cfg());
  REQUIRE(a.code == 0);
  CHECK(a.out == run(simulate_cfg()).out);
  auto threaded = simulate_cfg();
  threaded.threads = 3;
  CHECK(a.out == run(threaded).out);
  auto other = simulate_cfg();
  other.seed = 1;
  CHECK(a.out != run(other).out);
  CHECK(a.out.rfind("seed,lebesgue,g_last,dim_fit\n", 0) == 0);
  CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 4);
}

TEST_CASE("simulate writes CSV, summary and intervals") {
  const auto dir = scratch_dir("simulate");
  auto c = simulate_cfg();
  c.out = (dir / "run.csv").string();
  c.dump_intervals = true;
  const auto r = run(c);
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "run.csv") == run(simulate_cfg()).out);
  const auto summary = report::json::parse(slurp(dir / "run.csv.summary.json"));
  CHECK(report::json::parse(r.out) == summary);
  CHECK(summary["zero_class"] == "Recurrent");
  CHECK(summary["reps"] == 3);
  CHECK(summary["dim_fit"].contains("mean"));
  const auto iv = slurp(dir / "run.csv.intervals.csv");
  CHECK(iv.rfind("lo,hi\n0,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("report directory from the environment") {
  const auto dir = scratch_dir("env");
  ::setenv(cli::kReportDirEnv, dir.c_str(), 1);
  const auto r = run(classify_cfg("stable:d=1,alpha=2", "stable:d=1,beta=1"));
  ::unsetenv(cli::kReportDirEnv);
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "classify.json") == r.out);
  fs::remove_all(dir);
}

TEST_CASE("flat config files") {
  const auto dir = scratch_dir("config");
  const auto path = dir / "exp.cfg";
  std::ofstream(path) << "# recurrent Feller pair\n"
                         "command = simulate\n"
                         "psi = stable:d=1,alpha=2\n"
                         "phi = stable:d=0.5,beta=1   # light\n"
                         "T = 10\neps = 1e-4\nreps = 3\nseed = 12345\nthreads = 1\n\n";
  ExperimentConfig c;
  cli::apply(c, cli::read_flat_file(path.string()));
  CHECK(c.command == "simulate");
  CHECK(c.phi_spec == "stable:d=0.5,beta=1");
  CHECK(run(c).out == run(simulate_cfg()).out);

  std::ofstream(dir / "bad.cfg") << "T 10\n";
  CHECK_THROWS_AS(cli::read_flat_file((dir / "bad.cfg").string()), cli::ConfigError);
  CHECK_THROWS_AS(cli::read_flat_file((dir / "missing.cfg").string()), cli::ConfigError);
  ExperimentConfig d;
  CHECK_THROWS_AS(cli::apply(d, {{"colour", "red"}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::apply(d, {{"T", "1,2"}}), cli::ConfigError);
  CHECK(cli::parse_list("1, 2.5,1e-3") == std::vector<double>{1.0, 2.5, 1e-3});
  CHECK_THROWS_AS(cli::parse_list("1,x"), cli::ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("ou report") {
  ExperimentConfig c;
  c.command = "ou";
  c.alpha = 0.7;
  c.T = 10.0;
  c.eps = 1e-3;
  c.seed = 1;
  auto j = report::json::parse(run(c).out);
  CHECK(j["class"] == "TrivialPoint");
  CHECK(j["dim_fit"].is_null());

  c.alpha = 2.0;
  c.T = 100.0;
  c.eps = 1e-4;
  c.reps = 2;
  c.ks_samples = 2000;
  c.threads = 1;
  const auto r = run(c);
  REQUIRE(r.code == 0);
  j = report::json::parse(r.out);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"class", "alpha", "recurrent", "dim_theory", "dim_density", "dim_fit",
                                         "dim_fit_sd", "ks_pushforward", "ks_p_value", "T", "eps", "reps", "seed"});
  CHECK(j["dim_theory"].get<double>() == 0.5);
  CHECK(j["ks_pushforward"].get<double>() < 0.05);
  CHECK(r.out == run(c).out);

  c.alpha = 3.0;
  CHECK(run(c).code == 1);
}
