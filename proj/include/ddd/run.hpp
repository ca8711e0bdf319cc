// Experiment orchestration behind the command-line tool: configuration,
// multi-seed execution and the trials.csv / aggregate.csv / manifest.json
// outputs.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ddd/diagnostic.hpp"
#include "ddd/errors.hpp"
#include "ddd/sampling.hpp"
#include "ddd/testbed.hpp"

namespace ddd {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// One experiment: one schedule, many seeds. Multi-scale studies are
/// expressed as several configs.
struct RunConfig {
  std::string mode = "dynamic";  // "dynamic" | "static"
  std::string function = "griewank";
  std::string dataset;
  std::vector<std::string> columns;  // static: input column names
  std::string value_column;          // static: value column name
  std::optional<double> delta;       // static: dedup tolerance, required
  std::size_t dim = 2;
  std::size_t lattice_points = 20;
  double extent = 20;  // dynamic: side length M of the query lattice
  double qpdf = 0.8;
  double b = 1.4641;
  std::size_t n0 = 9;
  std::size_t max_samples = 40000;
  std::size_t max_iterations = 0;
  std::size_t trials = 1;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> seeds;  // overrides base_seed/trials when set
  std::size_t jobs = 1;
  std::string out = "out";
  std::size_t nk_floor = 500;

  std::vector<std::uint64_t> seed_list() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> s(trials);
    for (std::size_t t = 0; t < trials; ++t) s[t] = base_seed + t;
    return s;
  }

  Schedule schedule() const { return {b, n0, max_samples, max_iterations}; }

  void validate() const {
    if (mode != "dynamic" && mode != "static")
      throw ConfigError("mode must be 'dynamic' or 'static'");
    if (dim == 0) throw ConfigError("dim must be positive");
    if (lattice_points == 0) throw ConfigError("lattice-points must be positive");
    if (seeds.empty() && trials == 0) throw ConfigError("trials must be at least 1");
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    try {
      schedule().validate(dim);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (mode == "dynamic") {
      if (!(qpdf > 0 && qpdf < 1)) throw ConfigError("qpdf must lie in (0, 1)");
      if (!(extent > 0)) throw ConfigError("extent must be positive");
      bool known = false;
      for (const auto& n : testbed::function_names()) known |= n == function;
      if (!known) throw ConfigError("unknown function '" + function + "'");
      if (function == "ackley" && dim != 2) throw ConfigError("ackley requires dim = 2");
    } else {
      if (dataset.empty()) throw ConfigError("static mode needs a dataset path");
      if (columns.size() != dim)
        throw ConfigError("static mode needs exactly dim input columns");
      if (value_column.empty()) throw ConfigError("static mode needs a value column");
      if (!delta) throw ConfigError("static mode needs an explicit dedup delta");
      if (!(*delta >= 0)) throw ConfigError("delta must be nonnegative");
    }
  }
};

// JSON keys are the command-line flag names without the leading dashes.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["mode"] = c.mode;
  j["function"] = c.function;
  j["dataset"] = c.dataset;
  j["columns"] = c.columns;
  j["value-column"] = c.value_column;
  j["delta"] = c.delta ? nlohmann::json(*c.delta) : nlohmann::json(nullptr);
  j["dim"] = c.dim;
  j["lattice-points"] = c.lattice_points;
  j["extent"] = c.extent;
  j["qpdf"] = c.qpdf;
  j["b"] = c.b;
  j["n0"] = c.n0;
  j["max-samples"] = c.max_samples;
  j["max-iterations"] = c.max_iterations;
  j["trials"] = c.trials;
  j["base-seed"] = c.base_seed;
  j["seeds"] = c.seeds;
  j["jobs"] = c.jobs;
  j["out"] = c.out;
  j["nk-floor"] = c.nk_floor;
  return j;
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are errors.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mode") c.mode = v.get<std::string>();
      else if (key == "function") c.function = v.get<std::string>();
      else if (key == "dataset") c.dataset = v.get<std::string>();
      else if (key == "columns") {
        if (v.is_string()) {
          c.columns.clear();
          const auto s = v.get<std::string>();
          for (auto item : ddd::detail::split_csv_line(s)) c.columns.emplace_back(item);
        } else {
          c.columns = v.get<std::vector<std::string>>();
        }
      } else if (key == "value-column") c.value_column = v.get<std::string>();
      else if (key == "delta") {
        if (v.is_null()) c.delta.reset();
        else c.delta = v.get<double>();
      } else if (key == "dim") c.dim = v.get<std::size_t>();
      else if (key == "lattice-points") c.lattice_points = v.get<std::size_t>();
      else if (key == "extent") c.extent = v.get<double>();
      else if (key == "qpdf") c.qpdf = v.get<double>();
      else if (key == "b") c.b = v.get<double>();
      else if (key == "n0") c.n0 = v.get<std::size_t>();
      else if (key == "max-samples") c.max_samples = v.get<std::size_t>();
      else if (key == "max-iterations") c.max_iterations = v.get<std::size_t>();
      else if (key == "trials") c.trials = v.get<std::size_t>();
      else if (key == "base-seed") c.base_seed = v.get<std::uint64_t>();
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "jobs") c.jobs = v.get<std::size_t>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "nk-floor") c.nk_floor = v.get<std::size_t>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

/// Configuration of the bundled demo: g_2 on [-10,10]^2, 10 seeds.
inline RunConfig demo_config() {
  RunConfig c;
  c.mode = "dynamic";
  c.function = "griewank";
  c.dim = 2;
  c.lattice_points = 20;
  c.extent = 20;
  c.qpdf = 0.8;
  c.b = 1.4641;
  c.n0 = 9;
  c.max_samples = 40000;
  c.trials = 10;
  c.base_seed = 0;
  c.out = "demo_out";
  return c;
}

// ---------------------------------------------------------------------------
// CSV output

namespace csv {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("nan");
}

inline constexpr const char* kTrialsHeader = "seed,k,n_k,samp,r_msd,r_grad,valid_count";
inline constexpr const char* kAggregateHeader =
    "k,n_k,samp,mean_msd,q25_msd,q75_msd,d10_msd,d90_msd,"
    "mean_grad,q25_grad,q75_grad,d10_grad,d90_grad,defined_count";

struct TrialRecords {
  std::uint64_t seed = 0;
  std::vector<RateRecord> records;
};

inline void write_trials(std::ostream& os, const std::vector<TrialRecords>& trials) {
  os << kTrialsHeader << '\n';
  for (const auto& t : trials)
    for (const auto& r : t.records)
      os << t.seed << ',' << r.k << ',' << r.n_k << ',' << fmt(r.samp) << ',' << fmt(r.r_msd) << ','
         << fmt(r.r_grad) << ',' << r.valid_count << '\n';
}

/// defined_count is the number of trials with a defined MSD rate at that k.
inline void write_aggregate(std::ostream& os, const TrialAggregate& agg) {
  os << kAggregateHeader << '\n';
  for (const auto& r : agg.rows)
    os << r.k << ',' << r.n_k << ',' << fmt(r.samp) << ',' << fmt(r.msd.mean) << ','
       << fmt(r.msd.q25) << ',' << fmt(r.msd.q75) << ',' << fmt(r.msd.d10) << ','
       << fmt(r.msd.d90) << ',' << fmt(r.grad.mean) << ',' << fmt(r.grad.q25) << ','
       << fmt(r.grad.q75) << ',' << fmt(r.grad.d10) << ',' << fmt(r.grad.d90) << ','
       << r.msd.count << '\n';
}

inline std::optional<double> parse_rate(std::string_view s) {
  if (s == "nan" || s.empty()) return std::nullopt;
  double v = 0;
  if (!ddd::detail::parse_double(s, v)) throw DataError("cannot parse '" + std::string(s) + "'");
  return v;
}

template <class T>
T parse_uint(std::string_view s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("cannot parse '" + std::string(s) + "' as an integer");
  return v;
}

/// Reads a trials.csv; rows are grouped by seed in file order.
inline std::vector<TrialRecords> read_trials(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrialsHeader) throw DataError(name + ": unexpected header '" + line + "'");
  std::vector<TrialRecords> out;
  std::map<std::uint64_t, std::size_t> slot;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = ddd::detail::split_csv_line(line);
    if (f.size() != 7)
      throw DataError(name + ": row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                      " fields");
    try {
      const auto seed = parse_uint<std::uint64_t>(f[0]);
      RateRecord r;
      r.k = parse_uint<std::size_t>(f[1]);
      r.n_k = parse_uint<std::size_t>(f[2]);
      const auto samp = parse_rate(f[3]);
      if (!samp) throw DataError("missing samp");
      r.samp = *samp;
      r.r_msd = parse_rate(f[4]);
      r.r_grad = parse_rate(f[5]);
      r.valid_count = parse_uint<std::size_t>(f[6]);
      auto [it, fresh] = slot.try_emplace(seed, out.size());
      if (fresh) out.push_back({seed, {}});
      out[it->second].records.push_back(r);
    } catch (const DataError& e) {
      throw DataError(name + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Commands

struct TrialOutcome {
  std::uint64_t seed = 0;
  std::vector<RateRecord> records;
  std::optional<std::string> error;
};

struct RunResult {
  std::vector<TrialOutcome> trials;
  TrialAggregate aggregate;
  std::vector<std::size_t> schedule;
};

/// Builds the query set and runs every trial; geometry failures abort only
/// the affected trial.
inline RunResult execute(const RunConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  const auto seeds = cfg.seed_list();
  RunResult res;
  res.trials.resize(seeds.size());

  std::optional<StaticDataset> data;
  QuerySet queries;
  std::optional<BoundingBox> box;
  const Point center(cfg.dim, 0.0);
  if (cfg.mode == "static") {
    data = dedup_cluster(read_csv_dataset(cfg.dataset, cfg.columns, cfg.value_column), *cfg.delta);
    queries = percentile_lattice(*data, cfg.lattice_points);
    res.schedule = schedule_totals(cfg.schedule(), cfg.dim, data->size());
  } else {
    queries = build_lattice(center, cfg.extent, cfg.lattice_points);
    box = box_from_qpdf(cfg.extent, cfg.qpdf, center);
    res.schedule = schedule_totals(cfg.schedule(), cfg.dim);
  }

  std::mutex log_mu;
  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lk(log_mu);
    *log << msg << '\n';
  };

  auto run_one = [&](std::size_t t) {
    TrialOutcome& out = res.trials[t];
    out.seed = seeds[t];
    DiagnosticOptions opt;
    opt.nk_floor = cfg.nk_floor;
    opt.warn = [&, seed = seeds[t]](const std::string& m) {
      say("seed " + std::to_string(seed) + ": warning: " + m);
    };
    try {
      if (data) {
        out.records = run_static(*data, queries, cfg.schedule(), seeds[t], opt);
      } else {
        const auto f = testbed::make_function(cfg.function, cfg.dim, seeds[t]);
        out.records = run_dynamic(f, *box, queries, cfg.schedule(), seeds[t], opt);
      }
    } catch (const GeometryError& e) {
      out.records.clear();
      out.error = e.what();
      say("seed " + std::to_string(seeds[t]) + ": trial aborted: " + e.what());
    }
  };

  const std::size_t jobs = std::min(cfg.jobs, seeds.size());
  if (jobs <= 1) {
    for (std::size_t t = 0; t < seeds.size(); ++t) run_one(t);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = w; t < seeds.size(); t += jobs) run_one(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<std::vector<RateRecord>> ok;
  for (const auto& t : res.trials)
    if (!t.error) ok.push_back(t.records);
  res.aggregate = aggregate(ok);
  return res;
}

inline nlohmann::json manifest(const RunConfig& cfg, const RunResult& res) {
  nlohmann::json j;
  j["tool"] = "ddd";
  j["version"] = kVersion;
  j["config"] = to_json(cfg);
  j["schedule"] = res.schedule;
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : res.trials) {
    nlohmann::json e;
    e["seed"] = t.seed;
    e["status"] = t.error ? "aborted" : "ok";
    if (t.error) e["error"] = *t.error;
    trials.push_back(e);
  }
  j["trials"] = trials;
  return j;
}

inline void write_outputs(const RunConfig& cfg, const RunResult& res) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out);
  std::vector<csv::TrialRecords> rows;
  for (const auto& t : res.trials)
    if (!t.error) rows.push_back({t.seed, t.records});
  {
    std::ofstream os(fs::path(cfg.out) / "trials.csv", std::ios::binary);
    csv::write_trials(os, rows);
  }
  {
    std::ofstream os(fs::path(cfg.out) / "aggregate.csv", std::ios::binary);
    csv::write_aggregate(os, res.aggregate);
  }
  {
    std::ofstream os(fs::path(cfg.out) / "manifest.json", std::ios::binary);
    os << manifest(cfg, res).dump(2) << '\n';
  }
}

/// Runs a config and writes trials.csv, aggregate.csv and manifest.json.
inline RunResult cmd_run(const RunConfig& cfg, std::ostream* log = nullptr) {
  RunResult res = execute(cfg, log);
  write_outputs(cfg, res);
  return res;
}

/// Merges trials.csv files and recomputes the aggregate. Every file must
/// follow the same n_k schedule.
inline TrialAggregate cmd_aggregate(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("aggregate needs at least one trials.csv");
  std::map<std::size_t, std::size_t> schedule;  // k -> n_k
  std::vector<std::vector<RateRecord>> all;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open '" + p + "'");
    for (auto& t : csv::read_trials(in, p)) {
      for (const auto& r : t.records) {
        auto [it, fresh] = schedule.try_emplace(r.k, r.n_k);
        if (!fresh && it->second != r.n_k)
          throw ScheduleMismatch(p + ": n_k = " + std::to_string(r.n_k) + " at k = " +
                                 std::to_string(r.k) + " does not match " +
                                 std::to_string(it->second));
      }
      all.push_back(std::move(t.records));
    }
  }
  return aggregate(all);
}

inline RunResult cmd_demo(const std::string& out_dir, std::size_t jobs = 1,
                          std::ostream* log = nullptr) {
  RunConfig c = demo_config();
  c.out = out_dir;
  c.jobs = jobs;
  return cmd_run(c, log);
}

}  // namespace ddd
