// Command-line front end.
//
//   ddd run [--config cfg.json] [--b 1.4641] [--trials 10] ... --out DIR
//   ddd aggregate --out aggregate.csv run1/trials.csv run2/trials.csv
//   ddd demo [--out DIR]
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddd/run.hpp"

namespace {

// Flags mirror the config keys; only flags given on the command line
// override the config file.
struct Overrides {
  std::string config;
  nlohmann::json values = nlohmann::json::object();
};

template <class T>
void flag(CLI::App& app, Overrides& o, const std::string& name, const std::string& help) {
  app.add_option_function<T>(
      "--" + name, [&o, name](const T& v) { o.values[name] = v; }, help);
}

void add_run_flags(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config, "JSON config file (flags override its keys)");
  flag<std::string>(app, o, "mode", "dynamic | static");
  flag<std::string>(app, o, "function", "griewank | ackley | noise | quadratic");
  flag<std::string>(app, o, "dataset", "CSV file for static mode");
  flag<std::string>(app, o, "columns", "comma-separated input column names (static)");
  flag<std::string>(app, o, "value-column", "value column name (static)");
  flag<double>(app, o, "delta", "near-duplicate merge distance (static, required)");
  flag<std::size_t>(app, o, "dim", "input dimension d");
  flag<std::size_t>(app, o, "lattice-points", "query lattice points per dimension");
  flag<double>(app, o, "extent", "query lattice side length (dynamic)");
  flag<double>(app, o, "qpdf", "query lattice side / bounding box side (dynamic)");
  flag<double>(app, o, "b", "upsampling growth factor in (1, 2]");
  flag<std::size_t>(app, o, "n0", "initial sample count");
  flag<std::size_t>(app, o, "max-samples", "stop before the total exceeds this");
  flag<std::size_t>(app, o, "max-iterations", "maximum number of iterations (0: unlimited)");
  flag<std::size_t>(app, o, "trials", "number of seeds");
  flag<std::uint64_t>(app, o, "base-seed", "first seed; trial t uses base-seed + t");
  flag<std::size_t>(app, o, "jobs", "trials run concurrently");
  flag<std::string>(app, o, "out", "output directory");
  flag<std::size_t>(app, o, "nk-floor", "n_k display floor recorded in the manifest");
}

ddd::RunConfig resolve(const Overrides& o, ddd::RunConfig base = {}) {
  if (!o.config.empty()) base = ddd::load_config(o.config);
  ddd::apply_json(base, o.values);
  return base;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delaunay density diagnostic"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "run an experiment over several seeds");
  add_run_flags(*run, run_opts);

  std::vector<std::string> inputs;
  std::string agg_out = "aggregate.csv";
  auto* agg = app.add_subcommand("aggregate", "merge trials.csv files into one aggregate");
  agg->add_option("inputs", inputs, "trials.csv files")->required();
  agg->add_option("--out", agg_out, "output aggregate CSV");

  std::string demo_out = "demo_out";
  std::size_t demo_jobs = 1;
  auto* demo = app.add_subcommand("demo", "run the bundled Griewank demo");
  demo->add_option("--out", demo_out, "output directory");
  demo->add_option("--jobs", demo_jobs, "trials run concurrently");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = resolve(run_opts);
      const auto res = ddd::cmd_run(cfg, &std::cerr);
      std::size_t aborted = 0;
      for (const auto& t : res.trials) aborted += t.error ? 1 : 0;
      std::cerr << "wrote " << cfg.out << " (" << res.trials.size() - aborted << " trials, "
                << aborted << " aborted)\n";
    } else if (*agg) {
      const auto a = ddd::cmd_aggregate(inputs);
      std::ofstream os(agg_out, std::ios::binary);
      if (!os) throw ddd::DataError("cannot write '" + agg_out + "'");
      ddd::csv::write_aggregate(os, a);
    } else if (*demo) {
      ddd::cmd_demo(demo_out, demo_jobs, &std::cerr);
      std::cerr << "wrote " << demo_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
