// The Delaunay density diagnostic.
//
// Samples are refined in batches; after each batch the Delaunay interpolant
// (value and gradient) is evaluated at fixed query points. Differences
// between successive interpolants shrink like spacing^2 (values) and
// spacing^1 (gradients) when the sampling resolves the function, and stay
// flat (values) or grow (gradients) when the function looks like noise at
// that spacing. The rate r_k = log_b(|diff_{k-1}| / |diff_k|) therefore sits
// near 2 / 1 for resolved features and near 0 / -1 for noise.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/geometry.hpp"
#include "ddd/gradient.hpp"
#include "ddd/point_set.hpp"
#include "ddd/random.hpp"
#include "ddd/sampling.hpp"
#include "ddd/stats.hpp"

namespace ddd {

/// Upsampling schedule. A zero limit means "no limit"; at least one of the
/// two limits must be set.
struct Schedule {
  double b = 1.4641;
  std::size_t n0 = 9;
  std::size_t max_samples = 0;     // stop once the next total would exceed this
  std::size_t max_iterations = 0;  // maximum number of snapshots

  void validate(std::size_t dim) const {
    if (!(b > 1.0 && b <= 2.0)) throw InvalidArgument("growth factor b must lie in (1, 2]");
    if (n0 < dim + 1) throw InvalidArgument("n0 must be at least d+1");
    if (max_samples == 0 && max_iterations == 0)
      throw InvalidArgument("schedule needs a sample or iteration limit");
    if (max_samples != 0 && n0 > max_samples)
      throw InvalidArgument("n0 exceeds the sample limit");
  }
};

/// Interpolant values and gradients at every query for one iteration.
struct Snapshot {
  std::size_t k = 0;
  std::size_t n_k = 0;
  std::vector<std::optional<double>> values;
  std::vector<std::optional<std::vector<double>>> gradients;
};

struct RateRecord {
  std::size_t k = 0;
  std::size_t n_k = 0;
  double samp = 0;
  std::optional<double> r_msd;
  std::optional<double> r_grad;
  std::size_t valid_count = 0;
  bool below_floor = false;  // n_k under the display floor; kept, flagged
};

/// Per-k statistics of one rate across trials.
struct Band {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q25 = std::numeric_limits<double>::quiet_NaN();
  double q75 = std::numeric_limits<double>::quiet_NaN();
  double d10 = std::numeric_limits<double>::quiet_NaN();
  double d90 = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

struct AggregateRow {
  std::size_t k = 0;
  std::size_t n_k = 0;
  double samp = 0;
  Band msd;
  Band grad;
};

struct TrialAggregate {
  std::vector<AggregateRow> rows;  // ascending k
};

/// Options for the rate estimators.
struct RateOptions {
  std::size_t min_valid = 10;  // fewer valid queries -> Undefined
  double rms_floor = 1e-14;    // relative to value_scale
  double value_scale = 1.0;
};

struct DiagnosticOptions {
  GeometryTolerances geometry{};
  std::size_t min_valid = 10;
  double rms_floor = 1e-14;
  std::size_t nk_floor = 500;
  std::size_t jobs = 1;  // worker threads for the query loop
  double exclusion_warning = 0.10;
  std::function<void(const std::string&)> warn;  // optional sink for warnings
};

/// Next total sample count: round-half-away of (b n^{1/d} - (b-1))^d, and at
/// least n+1. This is the new total, not the number of points added.
inline std::size_t next_sample_total(std::size_t n, double b, std::size_t d) {
  if (n < 1) throw InvalidArgument("next_sample_total needs n >= 1");
  if (!(b > 1.0 && b <= 2.0)) throw InvalidArgument("growth factor b must lie in (1, 2]");
  const double dd = static_cast<double>(d);
  const double root = b * std::pow(static_cast<double>(n), 1.0 / dd) - (b - 1.0);
  const auto total = static_cast<std::size_t>(std::llround(std::pow(root, dd)));
  return std::max(total, n + 1);
}

/// Sample totals n_0, n_1, ... produced by a schedule (data independent).
/// `available` additionally caps totals by a dataset size.
inline std::vector<std::size_t> schedule_totals(const Schedule& s, std::size_t d,
                                                std::size_t available = 0) {
  s.validate(d);
  std::vector<std::size_t> totals{s.n0};
  if (available != 0 && s.n0 > available)
    throw InvalidArgument("n0 exceeds the number of available samples");
  for (;;) {
    if (s.max_iterations != 0 && totals.size() >= s.max_iterations) break;
    const std::size_t next = next_sample_total(totals.back(), s.b, d);
    if (s.max_samples != 0 && next > s.max_samples) break;
    if (available != 0 && next > available) break;
    totals.push_back(next);
  }
  return totals;
}

/// L / n^{1/d}.
inline double avg_sample_spacing(std::size_t n, double side, std::size_t d) {
  if (n < 1) throw InvalidArgument("avg_sample_spacing needs n >= 1");
  if (!(side > 0)) throw InvalidArgument("box side must be positive");
  return side * std::pow(static_cast<double>(n), -1.0 / static_cast<double>(d));
}

/// log_b of the ratio of root-mean-square differences, over queries valid in
/// both arrays. Undefined (nullopt) when too few are valid or either RMS is
/// below the relative floor.
inline std::optional<double> msd_rate(std::span<const std::optional<double>> prev,
                                      std::span<const std::optional<double>> cur, double b,
                                      const RateOptions& opt = {}) {
  if (prev.size() != cur.size()) throw DimensionMismatch("diff arrays differ in length");
  double sp = 0, sc = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (!prev[i] || !cur[i]) continue;
    sp += *prev[i] * *prev[i];
    sc += *cur[i] * *cur[i];
    ++n;
  }
  if (n < opt.min_valid || n == 0) return std::nullopt;
  const double rp = std::sqrt(sp / static_cast<double>(n));
  const double rc = std::sqrt(sc / static_cast<double>(n));
  const double floor = opt.rms_floor * opt.value_scale;
  if (!(rp >= floor) || !(rc >= floor) || rp == 0 || rc == 0) return std::nullopt;
  return std::log(rp / rc) / std::log(b);
}

/// As msd_rate, with the Frobenius norm of all valid difference vectors.
inline std::optional<double> grad_rate(std::span<const std::optional<std::vector<double>>> prev,
                                       std::span<const std::optional<std::vector<double>>> cur,
                                       double b, const RateOptions& opt = {}) {
  if (prev.size() != cur.size()) throw DimensionMismatch("diff arrays differ in length");
  double sp = 0, sc = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (!prev[i] || !cur[i]) continue;
    for (double v : *prev[i]) sp += v * v;
    for (double v : *cur[i]) sc += v * v;
    ++n;
  }
  if (n < opt.min_valid || n == 0) return std::nullopt;
  const double np = std::sqrt(sp), nc = std::sqrt(sc);
  // Floor compared per query so that it matches the msd convention.
  const double floor = opt.rms_floor * opt.value_scale * std::sqrt(static_cast<double>(n));
  if (!(np >= floor) || !(nc >= floor) || np == 0 || nc == 0) return std::nullopt;
  return std::log(np / nc) / std::log(b);
}

/// Evaluates value and gradient of the interpolant at every query, using
/// `jobs` threads. The result does not depend on the thread count.
inline Snapshot take_snapshot(const PointSet& ps, const std::vector<Point>& queries, std::size_t k,
                              std::size_t jobs = 1) {
  Snapshot snap;
  snap.k = k;
  snap.n_k = ps.size();
  snap.values.resize(queries.size());
  snap.gradients.resize(queries.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < queries.size(); i += stride) {
      Evaluation e = evaluate(ps, queries[i]);
      snap.values[i] = e.value;
      snap.gradients[i] = std::move(e.gradient);
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, queries.size()));
  if (jobs == 1) {
    work(0, 1);
    return snap;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&, t] {
      try {
        work(t, jobs);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return snap;
}

namespace detail {

inline std::vector<std::optional<double>> value_diffs(const Snapshot& a, const Snapshot& b) {
  std::vector<std::optional<double>> out(a.values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (a.values[i] && b.values[i]) out[i] = *b.values[i] - *a.values[i];
  return out;
}

inline std::vector<std::optional<std::vector<double>>> gradient_diffs(const Snapshot& a,
                                                                      const Snapshot& b) {
  std::vector<std::optional<std::vector<double>>> out(a.gradients.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!a.gradients[i] || !b.gradients[i]) continue;
    std::vector<double> d(a.gradients[i]->size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = (*b.gradients[i])[k] - (*a.gradients[i])[k];
    out[i] = std::move(d);
  }
  return out;
}

inline double value_scale(const Snapshot& s) {
  double m = 0;
  for (const auto& v : s.values)
    if (v) m = std::max(m, std::abs(*v));
  return m > 0 ? m : 1.0;
}

inline double gradient_scale(const Snapshot& s) {
  double m = 0;
  for (const auto& g : s.gradients)
    if (g)
      for (double v : *g) m = std::max(m, std::abs(v));
  return m > 0 ? m : 1.0;
}

// Shared refinement loop. `totals` is the full sample-count schedule and
// `grow(ps, n)` returns the point set holding the first n samples.
template <class Grow>
std::vector<RateRecord> refine(std::size_t dim, const QuerySet& queries,
                               const std::vector<std::size_t>& totals, double b, double side,
                               const DiagnosticOptions& opt, Grow&& grow) {
  std::vector<RateRecord> records;
  std::optional<Snapshot> s2, s1;  // snapshots k-2 and k-1
  for (std::size_t k = 0; k < totals.size(); ++k) {
    const PointSet ps = grow(totals[k]);
    Snapshot s0 = take_snapshot(ps, queries.points, k, opt.jobs);
    if (k >= 2) {
      const auto dv_prev = value_diffs(*s2, *s1);
      const auto dv_cur = value_diffs(*s1, s0);
      const auto dg_prev = gradient_diffs(*s2, *s1);
      const auto dg_cur = gradient_diffs(*s1, s0);
      RateRecord r;
      r.k = k;
      r.n_k = totals[k];
      r.samp = avg_sample_spacing(totals[k], side, dim);
      r.below_floor = totals[k] < opt.nk_floor;
      for (std::size_t i = 0; i < dv_cur.size(); ++i)
        if (dv_prev[i] && dv_cur[i]) ++r.valid_count;
      RateOptions ro{opt.min_valid, opt.rms_floor, value_scale(s0)};
      r.r_msd = msd_rate(dv_prev, dv_cur, b, ro);
      ro.value_scale = gradient_scale(s0);
      r.r_grad = grad_rate(dg_prev, dg_cur, b, ro);
      const auto excluded = queries.size() - r.valid_count;
      if (opt.warn && static_cast<double>(excluded) >
                          opt.exclusion_warning * static_cast<double>(queries.size()))
        opt.warn("iteration " + std::to_string(k) + ": " + std::to_string(excluded) + " of " +
                 std::to_string(queries.size()) + " queries excluded (outside the hull)");
      records.push_back(r);
    }
    s2 = std::move(s1);
    s1 = std::move(s0);
  }
  return records;
}

}  // namespace detail

/// Runs the diagnostic with fresh uniform samples from `box`. Existing
/// samples are kept and new draws appended at every iteration. Emits one
/// record per iteration k >= 2.
template <class F>
std::vector<RateRecord> run_dynamic(F&& f, const BoundingBox& box, const QuerySet& queries,
                                    const Schedule& sched, std::uint64_t seed,
                                    const DiagnosticOptions& opt = {}) {
  const std::size_t d = box.dim();
  if (queries.size() == 0) throw InvalidArgument("query set is empty");
  if (queries.dim() != d) throw DimensionMismatch("queries and box differ in dimension");
  for (const auto& q : queries.points)
    if (!box.contains(q)) throw InvalidArgument("query point outside the bounding box");
  const auto totals = schedule_totals(sched, d);

  Rng rng(seed);
  std::vector<double> coords, values;
  auto grow = [&](std::size_t n) {
    const std::size_t have = values.size();
    for (const auto& p : sample_uniform(box, n - have, rng)) {
      coords.insert(coords.end(), p.begin(), p.end());
      values.push_back(f(std::span<const double>(p)));
    }
    return PointSet(d, coords, values, opt.geometry);
  };
  return detail::refine(d, queries, totals, sched.b, box.mean_side(), opt, grow);
}

/// Mean side of the inputs' bounding box; the L used for static data.
inline double dataset_side(const StaticDataset& ds) {
  const std::size_t d = ds.dim();
  double s = 0;
  for (std::size_t k = 0; k < d; ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& x : ds.inputs) {
      lo = std::min(lo, x[k]);
      hi = std::max(hi, x[k]);
    }
    s += hi - lo;
  }
  return s / static_cast<double>(d);
}

/// Runs the diagnostic on a fixed dataset: the index is shuffled with the
/// seeded generator and each iteration takes the next batch in that order.
/// Stops as soon as the next total exceeds the dataset size.
inline std::vector<RateRecord> run_static(const StaticDataset& ds, const QuerySet& queries,
                                          const Schedule& sched, std::uint64_t seed,
                                          const DiagnosticOptions& opt = {}) {
  const std::size_t d = ds.dim();
  if (ds.size() < d + 1) throw EmptyAfterDedup("dataset has fewer than d+1 points");
  if (queries.size() == 0) throw InvalidArgument("query set is empty");
  if (queries.dim() != d) throw DimensionMismatch("queries and dataset differ in dimension");
  const auto totals = schedule_totals(sched, d, ds.size());

  Rng rng(seed);
  const auto order = shuffled_index(ds.size(), rng);
  std::vector<double> coords, values;
  auto grow = [&](std::size_t n) {
    for (std::size_t i = values.size(); i < n; ++i) {
      const auto& x = ds.inputs[order[i]];
      coords.insert(coords.end(), x.begin(), x.end());
      values.push_back(ds.values[order[i]]);
    }
    return PointSet(d, coords, values, opt.geometry);
  };
  return detail::refine(d, queries, totals, sched.b, dataset_side(ds), opt, grow);
}

namespace detail {

inline Band band_of(std::vector<double> xs) {
  Band b;
  b.count = xs.size();
  if (xs.empty()) return b;
  b.mean = mean(xs);
  b.median = quantile(xs, 0.5);
  b.q25 = quantile(xs, 0.25);
  b.q75 = quantile(xs, 0.75);
  b.d10 = quantile(xs, 0.10);
  b.d90 = quantile(xs, 0.90);
  return b;
}

}  // namespace detail

/// Mean, quartiles and deciles per iteration over the trials where each
/// rate is defined. All trials must agree on n_k at every shared k.
inline TrialAggregate aggregate(const std::vector<std::vector<RateRecord>>& trials) {
  struct Acc {
    std::size_t n_k = 0;
    double samp = 0;
    std::vector<double> msd, grad;
  };
  std::map<std::size_t, Acc> by_k;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    for (const auto& r : trials[t]) {
      auto [it, fresh] = by_k.try_emplace(r.k);
      Acc& a = it->second;
      if (fresh) {
        a.n_k = r.n_k;
        a.samp = r.samp;
      } else if (a.n_k != r.n_k) {
        throw ScheduleMismatch("trial " + std::to_string(t) + " has n_k = " +
                               std::to_string(r.n_k) + " at k = " + std::to_string(r.k) +
                               ", expected " + std::to_string(a.n_k));
      }
      if (r.r_msd) a.msd.push_back(*r.r_msd);
      if (r.r_grad) a.grad.push_back(*r.r_grad);
    }
  }
  TrialAggregate agg;
  for (auto& [k, a] : by_k)
    agg.rows.push_back({k, a.n_k, a.samp, detail::band_of(std::move(a.msd)),
                        detail::band_of(std::move(a.grad))});
  return agg;
}

}  // namespace ddd
