#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cbi/cli.hpp"

namespace {

struct Flags {
  std::string config, psi, phi, q, t, out, format;
  double T = 0, eps = 0, lambda = 0, alpha = 0;
  long long reps = 1;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::size_t ks_samples = 0;
  bool dump_intervals = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "flat key = value config file");
  sub->add_option("--format", f.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--out", f.out, "also write the report here");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero sets of CBI processes: classification, laws and cutout simulation"};
  app.require_subcommand(1);
  Flags f;

  auto* classify = app.add_subcommand("classify", "classify the zero set of a (psi, phi) pair");
  auto* vflow = app.add_subcommand("vflow", "table of t, v_t and optionally v_t(lambda)");
  auto* laplace = app.add_subcommand("laplace", "Laplace exponent L(q) of the zero-set subordinator");
  auto* gzero = app.add_subcommand("gzero", "density and cdf of the last zero");
  auto* simulate = app.add_subcommand("simulate", "simulate cutout replicates");
  auto* ou = app.add_subcommand("ou", "stable OU zero set: classification, dimension fit, pushforward check");

  for (auto* s : {classify, vflow, laplace, gzero, simulate, ou}) add_common(s, f);
  for (auto* s : {classify, vflow, laplace, gzero, simulate}) s->add_option("--psi", f.psi, "branching mechanism");
  for (auto* s : {classify, laplace, gzero, simulate}) s->add_option("--phi", f.phi, "immigration mechanism");
  vflow->add_option("--t", f.t, "comma-separated times");
  vflow->add_option("--lambda", f.lambda, "initial value for v_t(lambda)");
  gzero->add_option("--t", f.t, "comma-separated times");
  laplace->add_option("--q", f.q, "comma-separated arguments");
  for (auto* s : {simulate, ou}) {
    s->add_option("--T", f.T, "horizon");
    s->add_option("--eps", f.eps, "cut-length truncation");
    s->add_option("--reps", f.reps, "replicates");
    s->add_option("--seed", f.seed, "master seed");
    s->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  }
  simulate->add_flag("--dump-intervals", f.dump_intervals, "write replicate 0 intervals to <out>.intervals.csv");
  ou->add_option("--alpha", f.alpha, "stability index in (0, 2]");
  ou->add_option("--ks-samples", f.ks_samples, "pushforward sample size");

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  cbi::cli::ExperimentConfig c;
  try {
    if (!f.config.empty()) cbi::cli::apply(c, cbi::cli::read_flat_file(f.config));
    c.command = sub->get_name();
    auto given = [&](const char* name) { return sub->get_option_no_throw(name) && sub->count(name) > 0; };
    if (given("--psi")) c.psi_spec = f.psi;
    if (given("--phi")) c.phi_spec = f.phi;
    if (given("--q")) c.q_list = cbi::cli::parse_list(f.q);
    if (given("--t")) c.t_list = cbi::cli::parse_list(f.t);
    if (given("--lambda")) c.lambda = f.lambda;
    if (given("--T")) c.T = f.T;
    if (given("--eps")) c.eps = f.eps;
    if (given("--reps")) c.reps = f.reps;
    if (given("--seed")) c.seed = f.seed;
    if (given("--threads")) c.threads = f.threads;
    if (given("--alpha")) c.alpha = f.alpha;
    if (given("--ks-samples")) c.ks_samples = f.ks_samples;
    if (given("--out")) c.out = f.out;
    if (given("--format")) c.format = f.format;
    if (f.dump_intervals) c.dump_intervals = true;
  } catch (const std::exception& e) {
    std::cerr << "cbizero: " << e.what() << '\n';
    return 1;
  }
  return cbi::cli::run(c, std::cout, std::cerr);
}
