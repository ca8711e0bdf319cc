#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ddd/diagnostic.hpp"
#include "ddd/testbed.hpp"

using namespace ddd;

namespace {

using Diffs = std::vector<std::optional<double>>;
using VecDiffs = std::vector<std::optional<std::vector<double>>>;

Diffs random_diffs(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Diffs v(n);
  for (auto& x : v) x = nd(gen);
  return v;
}

Diffs scaled(const Diffs& v, double c) {
  Diffs out = v;
  for (auto& x : out)
    if (x) *x *= c;
  return out;
}

// g_2 restricted to a small window, cheap enough for unit-test runs.
double smooth(std::span<const double> x) { return testbed::griewank(x); }

QuerySet small_lattice() { return build_lattice({0, 0}, 4, 6); }

Schedule small_schedule() {
  Schedule s;
  s.n0 = 9;
  s.max_samples = 3000;
  return s;
}

}  // namespace

TEST(NextSampleTotal, Examples) {
  EXPECT_EQ(next_sample_total(9, 1.4641, 2), 15u);
  EXPECT_EQ(next_sample_total(1, 1.4641, 2), 2u);
  EXPECT_EQ(next_sample_total(1, 2.0, 5), 2u);
  EXPECT_EQ(next_sample_total(1, 1.1, 1), 2u);
}

TEST(NextSampleTotal, PublishedSuccessor) {
  const double n = static_cast<double>(next_sample_total(17830, 1.4641, 2));
  EXPECT_LE(std::abs(n - 38039.0) / 38039.0, 1e-3);
}

TEST(NextSampleTotal, RejectsBadArguments) {
  EXPECT_THROW(next_sample_total(0, 1.5, 2), InvalidArgument);
  EXPECT_THROW(next_sample_total(10, 1.0, 2), InvalidArgument);
  EXPECT_THROW(next_sample_total(10, 2.5, 2), InvalidArgument);
}

TEST(NextSampleTotal, GrowthApproachesBToTheD) {
  // The successor is round((b n^{1/d} - (b-1))^d), so n_{k+1}/n_k sits below
  // b^d by about d (b-1) / (b n^{1/d}). The gap closes slowly for larger d.
  for (double b : {1.1, 1.21, 1.4641}) {
    for (std::size_t d : {2u, 3u, 4u}) {
      const double dd = static_cast<double>(d);
      const double target = std::pow(b, dd);
      double prev_gap = 1.0;
      for (std::size_t n = d + 1; n < 1'000'000'000;) {
        const std::size_t next = next_sample_total(n, b, d);
        ASSERT_GT(next, n);
        const double exact = std::pow(b * std::pow(static_cast<double>(n), 1 / dd) - (b - 1), dd);
        if (next > n + 1) EXPECT_LE(std::abs(static_cast<double>(next) - exact), 0.5 + 1e-6 * exact);
        const double gap = 1 - static_cast<double>(next) / static_cast<double>(n) / target;
        if (n >= 10'000) {
          EXPECT_GT(gap, 0.0);
          EXPECT_LE(gap, prev_gap + 1.0 / static_cast<double>(n));
          EXPECT_LE(gap, 1.05 * dd * (b - 1) / (b * std::pow(static_cast<double>(n), 1 / dd)));
          if (d == 2 || n >= 100'000'000) EXPECT_LE(gap, 0.02) << "b=" << b << " d=" << d << " n=" << n;
          prev_gap = gap;
        }
        n = next;
      }
    }
  }
}

TEST(Schedule, Validation) {
  Schedule s;
  EXPECT_THROW(s.validate(2), InvalidArgument);  // no stop rule
  s.max_samples = 100;
  EXPECT_NO_THROW(s.validate(2));
  s.n0 = 2;
  EXPECT_THROW(s.validate(2), InvalidArgument);
  s.n0 = 9;
  s.b = 1.0;
  EXPECT_THROW(s.validate(2), InvalidArgument);
  s.b = 2.0;
  EXPECT_NO_THROW(s.validate(2));
}

TEST(Schedule, Totals) {
  Schedule s;
  s.max_samples = 1000;
  EXPECT_EQ(schedule_totals(s, 2), (std::vector<std::size_t>{9, 15, 27, 51, 100, 201, 412, 856}));
  s.max_iterations = 3;
  EXPECT_EQ(schedule_totals(s, 2), (std::vector<std::size_t>{9, 15, 27}));
}

TEST(Schedule, StaticStopsAtDatasetSize) {
  Schedule s;
  s.n0 = 50;
  s.max_samples = 1'000'000;
  EXPECT_EQ(schedule_totals(s, 2, 500), (std::vector<std::size_t>{50, 98, 197, 403}));
  EXPECT_GT(next_sample_total(403, s.b, 2), 500u);
}

TEST(AvgSampleSpacing, Examples) {
  EXPECT_DOUBLE_EQ(avg_sample_spacing(100, 25, 2), 2.5);
  EXPECT_DOUBLE_EQ(avg_sample_spacing(1, 25, 3), 25.0);
  EXPECT_NEAR(avg_sample_spacing(173832, 25, 2), 0.059961866784384, 1e-12);
  EXPECT_THROW(avg_sample_spacing(0, 25, 2), InvalidArgument);
  EXPECT_THROW(avg_sample_spacing(10, 0, 2), InvalidArgument);
}

TEST(MsdRate, Examples) {
  const Diffs prev{0.9, 0.9}, cur{0.3, 0.3};
  RateOptions opt;
  opt.min_valid = 2;
  const auto r = msd_rate(prev, cur, 3.0, opt);
  ASSERT_TRUE(r);
  EXPECT_NEAR(*r, 1.0, 1e-12);
  // The default floor of ten valid queries makes the same pair Undefined.
  EXPECT_FALSE(msd_rate(prev, cur, 3.0));
}

TEST(MsdRate, Identities) {
  std::mt19937_64 gen(1);
  const double b = 1.4641;
  const auto cur = random_diffs(400, gen);
  for (double rho : {-1.0, 0.0, 1.0, 2.0}) {
    const auto prev = scaled(cur, std::pow(b, rho));
    const auto r = msd_rate(prev, cur, b);
    ASSERT_TRUE(r);
    EXPECT_NEAR(*r, rho, 1e-12);
  }
}

TEST(MsdRate, UndefinedCases) {
  std::mt19937_64 gen(2);
  const auto cur = random_diffs(50, gen);
  const Diffs zero(50, 0.0);
  EXPECT_FALSE(msd_rate(zero, cur, 1.5));
  EXPECT_FALSE(msd_rate(cur, zero, 1.5));
  Diffs sparse(50);
  for (std::size_t i = 0; i < 9; ++i) sparse[i] = 1.0;
  EXPECT_FALSE(msd_rate(sparse, cur, 1.5));
  RateOptions opt;
  opt.value_scale = 1e20;  // floor 1e6 above every diff
  EXPECT_FALSE(msd_rate(cur, cur, 1.5, opt));
  EXPECT_THROW(msd_rate(cur, Diffs(49, 1.0), 1.5), DimensionMismatch);
}

TEST(MsdRate, UsesOnlyQueriesValidInBoth) {
  std::mt19937_64 gen(3);
  const auto cur = random_diffs(100, gen);
  auto prev = scaled(cur, 1.4641 * 1.4641);
  auto cur2 = cur;
  prev[3].reset();
  cur2[7].reset();
  cur2[3] = 1e6;  // ignored because prev[3] is missing
  const auto r = msd_rate(prev, cur2, 1.4641);
  ASSERT_TRUE(r);
  EXPECT_NEAR(*r, 2.0, 1e-12);
}

TEST(MsdRate, PermutationInvariant) {
  std::mt19937_64 gen(4);
  const auto a = random_diffs(200, gen), b = random_diffs(200, gen);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), gen);
  Diffs pa, pb;
  for (auto i : perm) {
    pa.push_back(a[i]);
    pb.push_back(b[i]);
  }
  EXPECT_NEAR(*msd_rate(a, b, 1.21), *msd_rate(pa, pb, 1.21), 1e-12);
}

TEST(GradRate, Identities) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  const double b = 1.21;
  VecDiffs cur(300);
  for (auto& v : cur) v = std::vector<double>{nd(gen), nd(gen), nd(gen)};
  for (double rho : {-1.0, 0.0, 1.0, 1.5, 2.0}) {
    VecDiffs prev = cur;
    for (auto& v : prev)
      for (double& x : *v) x *= std::pow(b, rho);
    const auto r = grad_rate(prev, cur, b);
    ASSERT_TRUE(r);
    EXPECT_NEAR(*r, rho, 1e-12);
  }
}

TEST(GradRate, FrobeniusRatioNotPerQuery) {
  // Per-query norms differ; only the totals enter the rate.
  const double b = 1.4641;
  VecDiffs prev(20), cur(20);
  for (std::size_t i = 0; i < 20; ++i) {
    prev[i] = std::vector<double>{i < 10 ? 2.0 : 0.0, 0.0};
    cur[i] = std::vector<double>{1.0, 1.0};
  }
  // |prev|^2 = 40, |cur|^2 = 40: rate 0 even though no single query matches.
  EXPECT_NEAR(*grad_rate(prev, cur, b), 0.0, 1e-12);
  for (auto& v : prev)
    for (double& x : *v) x *= std::pow(b, 1.5);
  EXPECT_NEAR(*grad_rate(prev, cur, b), 1.5, 1e-12);
}

TEST(Stats, LinearQuantiles) {
  const std::vector<double> xs{5, 1, 4, 2, 3};
  EXPECT_DOUBLE_EQ(quantile(xs, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.75), 4.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.9), 4.6);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.3), 7.0);
  EXPECT_DOUBLE_EQ(mean(xs), 3.0);
}

TEST(Aggregate, FiveTrials) {
  std::vector<std::vector<RateRecord>> trials;
  for (double r : {3.0, 1.0, 5.0, 2.0, 4.0}) {
    RateRecord rec;
    rec.k = 2;
    rec.n_k = 27;
    rec.samp = 1.0;
    rec.r_msd = r;
    rec.r_grad = -r;
    trials.push_back({rec});
  }
  const auto agg = aggregate(trials);
  ASSERT_EQ(agg.rows.size(), 1u);
  const auto& row = agg.rows[0];
  EXPECT_DOUBLE_EQ(row.msd.mean, 3.0);
  EXPECT_DOUBLE_EQ(row.msd.median, 3.0);
  EXPECT_DOUBLE_EQ(row.msd.q25, 2.0);
  EXPECT_DOUBLE_EQ(row.msd.q75, 4.0);
  EXPECT_DOUBLE_EQ(row.grad.q25, -4.0);
  EXPECT_EQ(row.msd.count, 5u);
}

TEST(Aggregate, SingleTrialIsItself) {
  RateRecord a{2, 27, 0.5, 1.25, std::nullopt, 30, true};
  RateRecord b{3, 51, 0.4, std::nullopt, -0.5, 30, true};
  const auto agg = aggregate({{a, b}});
  ASSERT_EQ(agg.rows.size(), 2u);
  const auto& r0 = agg.rows[0].msd;
  for (double v : {r0.mean, r0.median, r0.q25, r0.q75, r0.d10, r0.d90}) EXPECT_EQ(v, 1.25);
  EXPECT_EQ(agg.rows[0].grad.count, 0u);
  EXPECT_TRUE(std::isnan(agg.rows[0].grad.mean));
  EXPECT_EQ(agg.rows[1].grad.mean, -0.5);
}

TEST(Aggregate, BandsAreNested) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd;
  std::vector<std::vector<RateRecord>> trials(37);
  for (auto& t : trials)
    for (std::size_t k = 2; k < 6; ++k) t.push_back({k, 10 * k, 1.0, nd(gen), nd(gen), 10, false});
  for (const auto& row : aggregate(trials).rows)
    for (const Band* b : {&row.msd, &row.grad}) {
      EXPECT_LE(b->d10, b->q25);
      EXPECT_LE(b->q25, b->median);
      EXPECT_LE(b->median, b->q75);
      EXPECT_LE(b->q75, b->d90);
    }
}

TEST(Aggregate, ScheduleMismatch) {
  RateRecord a{2, 27, 1, 1.0, 1.0, 10, false};
  RateRecord b{2, 28, 1, 1.0, 1.0, 10, false};
  EXPECT_THROW(aggregate({{a}, {b}}), ScheduleMismatch);
}

TEST(RunDynamic, AffineGivesUndefinedRates) {
  const auto box = BoundingBox::cube({0, 0}, 5);
  auto affine = [](std::span<const double> x) { return 2 * x[0] - 3 * x[1] + 0.5; };
  const auto recs = run_dynamic(affine, box, small_lattice(), small_schedule(), 1);
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) {
    EXPECT_FALSE(r.r_msd);
    EXPECT_FALSE(r.r_grad);
  }
}

TEST(RunDynamic, RecordsAreConsistent) {
  const auto box = BoundingBox::cube({0, 0}, 5);
  const auto q = small_lattice();
  const auto sched = small_schedule();
  const auto recs = run_dynamic(smooth, box, q, sched, 2);
  const auto totals = schedule_totals(sched, 2);
  ASSERT_EQ(recs.size(), totals.size() - 2);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].k, i + 2);
    EXPECT_EQ(recs[i].n_k, totals[i + 2]);
    EXPECT_NEAR(recs[i].samp, 5.0 / std::sqrt(static_cast<double>(totals[i + 2])), 1e-12);
    EXPECT_LE(recs[i].valid_count, q.size());
    EXPECT_EQ(recs[i].below_floor, totals[i + 2] < 500);
  }
}

TEST(RunDynamic, ValueScaleEquivariance) {
  const auto box = BoundingBox::cube({0, 0}, 5);
  const auto q = small_lattice();
  const auto a = run_dynamic(smooth, box, q, small_schedule(), 3);
  auto scaled_f = [](std::span<const double> x) { return 37.5 * testbed::griewank(x); };
  const auto b = run_dynamic(scaled_f, box, q, small_schedule(), 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].r_msd.has_value(), b[i].r_msd.has_value());
    ASSERT_EQ(a[i].r_grad.has_value(), b[i].r_grad.has_value());
    if (a[i].r_msd) EXPECT_NEAR(*a[i].r_msd, *b[i].r_msd, 1e-9);
    if (a[i].r_grad) EXPECT_NEAR(*a[i].r_grad, *b[i].r_grad, 1e-9);
  }
}

TEST(RunDynamic, QueryOrderDoesNotMatter) {
  const auto box = BoundingBox::cube({0, 0}, 5);
  const auto q = small_lattice();
  auto rq = q;
  std::reverse(rq.points.begin(), rq.points.end());
  const auto a = run_dynamic(smooth, box, q, small_schedule(), 4);
  const auto b = run_dynamic(smooth, box, rq, small_schedule(), 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].valid_count, b[i].valid_count);
    if (a[i].r_msd) EXPECT_NEAR(*a[i].r_msd, *b[i].r_msd, 1e-12);
    if (a[i].r_grad) EXPECT_NEAR(*a[i].r_grad, *b[i].r_grad, 1e-12);
  }
}

TEST(RunDynamic, DeterministicAndThreadIndependent) {
  const auto box = BoundingBox::cube({0, 0}, 5);
  const auto q = small_lattice();
  DiagnosticOptions one, four;
  four.jobs = 4;
  const auto a = run_dynamic(smooth, box, q, small_schedule(), 5, one);
  const auto b = run_dynamic(smooth, box, q, small_schedule(), 5, four);
  const auto c = run_dynamic(smooth, box, q, small_schedule(), 6, one);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].r_msd, b[i].r_msd);
    EXPECT_EQ(a[i].r_grad, b[i].r_grad);
    EXPECT_EQ(a[i].n_k, c[i].n_k);
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].r_msd != c[i].r_msd;
  EXPECT_TRUE(differs);
}

TEST(RunDynamic, WarnsWhenManyQueriesExtrapolate) {
  // Queries reach the box corners, so early hulls miss many of them.
  const auto box = BoundingBox::cube({0, 0}, 4);
  std::vector<std::string> warnings;
  DiagnosticOptions opt;
  opt.warn = [&](const std::string& m) { warnings.push_back(m); };
  Schedule s;
  s.max_samples = 200;
  const auto recs = run_dynamic(smooth, box, small_lattice(), s, 7, opt);
  ASSERT_FALSE(warnings.empty());
  EXPECT_NE(warnings.front().find("excluded"), std::string::npos);
  EXPECT_LT(recs.front().valid_count, small_lattice().size());
}

TEST(RunDynamic, RejectsQueriesOutsideBox) {
  const auto box = BoundingBox::cube({0, 0}, 2);
  EXPECT_THROW(run_dynamic(smooth, box, small_lattice(), small_schedule(), 1), InvalidArgument);
}

namespace {

StaticDataset synthetic_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  StaticDataset ds;
  ds.input_columns = {"x", "y"};
  ds.value_column = "f";
  ds.inputs = sample_uniform(BoundingBox::cube({0, 0}, 4), n, rng);
  for (const auto& x : ds.inputs) ds.values.push_back(testbed::griewank(x));
  return ds;
}

}  // namespace

TEST(RunStatic, ScheduleBreaksAtDatasetSize) {
  const auto ds = synthetic_dataset(500, 1);
  const auto q = percentile_lattice(ds, 5);
  Schedule s;
  s.n0 = 50;
  s.max_samples = 1'000'000;
  const auto recs = run_static(ds, q, s, 3);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].n_k, 197u);
  EXPECT_EQ(recs[1].n_k, 403u);
}

TEST(RunStatic, SeedsChangeRatesNotSchedule) {
  const auto ds = synthetic_dataset(2000, 2);
  const auto q = percentile_lattice(ds, 5);
  Schedule s;
  s.n0 = 20;
  s.max_samples = 1'000'000;
  const auto a = run_static(ds, q, s, 10);
  const auto b = run_static(ds, q, s, 11);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].n_k, b[i].n_k);
    EXPECT_EQ(a[i].samp, b[i].samp);
    differs |= a[i].r_msd != b[i].r_msd;
  }
  EXPECT_TRUE(differs);
  const auto again = run_static(ds, q, s, 10);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].r_msd, again[i].r_msd);
}

TEST(RunStatic, SpacingUsesDatasetBoundingBox) {
  const auto ds = synthetic_dataset(300, 3);
  Schedule s;
  s.n0 = 20;
  s.max_samples = 1'000'000;
  const auto recs = run_static(ds, percentile_lattice(ds, 4), s, 1);
  const double side = dataset_side(ds);
  EXPECT_GT(side, 3.5);
  EXPECT_LE(side, 4.0);
  for (const auto& r : recs)
    EXPECT_NEAR(r.samp, side / std::sqrt(static_cast<double>(r.n_k)), 1e-12);
}

TEST(RunStatic, TooFewPoints) {
  StaticDataset ds;
  ds.inputs = {{0, 0}, {1, 0}};
  ds.values = {0, 0};
  Schedule s;
  s.n0 = 3;
  s.max_samples = 10;
  EXPECT_THROW(run_static(ds, build_lattice({0.5, 0}, 0.5, 2), s, 0), EmptyAfterDedup);
}
