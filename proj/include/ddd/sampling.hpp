// Sample generation, query lattices and static-dataset ingestion.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/point_set.hpp"
#include "ddd/random.hpp"
#include "ddd/stats.hpp"

namespace ddd {

struct BoundingBox {
  Point lower;
  Point upper;

  BoundingBox() = default;
  BoundingBox(Point lo, Point hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.empty())
      throw DimensionMismatch("bounding box corners differ in dimension");
    for (std::size_t k = 0; k < lower.size(); ++k)
      if (!(upper[k] > lower[k]))
        throw InvalidArgument("bounding box upper corner must exceed lower corner");
  }

  static BoundingBox cube(const Point& center, double side) {
    Point lo(center), hi(center);
    for (std::size_t k = 0; k < center.size(); ++k) {
      lo[k] -= 0.5 * side;
      hi[k] += 0.5 * side;
    }
    return {lo, hi};
  }

  std::size_t dim() const { return lower.size(); }

  /// Mean side length, the L of the average-spacing formula.
  double mean_side() const {
    double s = 0;
    for (std::size_t k = 0; k < dim(); ++k) s += upper[k] - lower[k];
    return s / static_cast<double>(dim());
  }

  bool contains(std::span<const double> x) const {
    if (x.size() != dim()) return false;
    for (std::size_t k = 0; k < dim(); ++k)
      if (x[k] < lower[k] || x[k] > upper[k]) return false;
    return true;
  }
};

enum class QueryProvenance { Lattice, PercentileLattice, Explicit };

struct QuerySet {
  std::vector<Point> points;
  QueryProvenance provenance = QueryProvenance::Explicit;
  std::size_t per_dim = 0;  // lattice points per dimension, when a lattice

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

/// Static input-output pairs, optionally labelled by column name.
struct StaticDataset {
  std::vector<Point> inputs;
  std::vector<double> values;
  std::vector<std::string> input_columns;
  std::string value_column;
  double delta = 0;  // dedup tolerance applied, if any

  std::size_t size() const { return values.size(); }
  std::size_t dim() const { return inputs.empty() ? input_columns.size() : inputs.front().size(); }
};

inline std::vector<Point> sample_uniform(const BoundingBox& box, std::size_t count, Rng& rng) {
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Point p(box.dim());
    for (std::size_t k = 0; k < box.dim(); ++k) p[k] = rng.uniform(box.lower[k], box.upper[k]);
    out.push_back(std::move(p));
  }
  return out;
}

namespace detail {

// p^d points, last coordinate varying fastest. axes[k] lists the values
// along coordinate k.
inline std::vector<Point> tensor_grid(const std::vector<std::vector<double>>& axes) {
  const std::size_t d = axes.size();
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  std::vector<Point> pts;
  pts.reserve(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t n = 0; n < total; ++n) {
    Point p(d);
    for (std::size_t k = 0; k < d; ++k) p[k] = axes[k][idx[k]];
    pts.push_back(std::move(p));
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < axes[k].size()) break;
      idx[k] = 0;
    }
  }
  return pts;
}

// p evenly spaced values in [lo, hi], endpoints included; offsets are
// computed from the interval midpoint so the axis is symmetric.
inline std::vector<double> axis(double lo, double hi, std::size_t p) {
  const double mid = 0.5 * (lo + hi);
  if (p == 1) return {mid};
  std::vector<double> v(p);
  const double half = 0.5 * (hi - lo);
  for (std::size_t j = 0; j < p; ++j) {
    const double num = 2.0 * static_cast<double>(j) - static_cast<double>(p - 1);
    v[j] = mid + half * num / static_cast<double>(p - 1);
  }
  v.front() = lo;
  v.back() = hi;
  return v;
}

}  // namespace detail

/// Axis-aligned p^d lattice of extent `side` centred at `center`, corners
/// included. p = 1 gives the center alone.
inline QuerySet build_lattice(const Point& center, double side, std::size_t p) {
  if (p == 0) throw InvalidArgument("lattice needs at least one point per dimension");
  if (center.empty()) throw InvalidArgument("lattice center has no coordinates");
  std::vector<std::vector<double>> axes;
  for (double c : center) axes.push_back(detail::axis(c - 0.5 * side, c + 0.5 * side, p));
  return {detail::tensor_grid(axes), QueryProvenance::Lattice, p};
}

/// Cube with side M / qpdf around `center`.
inline BoundingBox box_from_qpdf(double query_extent, double qpdf, const Point& center) {
  if (!(qpdf > 0 && qpdf <= 1)) throw InvalidArgument("qpdf must lie in (0, 1]");
  if (!(query_extent > 0)) throw InvalidArgument("query extent must be positive");
  return BoundingBox::cube(center, query_extent / qpdf);
}

namespace detail {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

// One single-linkage pass; returns whether anything merged.
inline bool dedup_pass(StaticDataset& ds, double delta) {
  const std::size_t n = ds.size();
  if (n < 2) return false;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.inputs[a][0] < ds.inputs[b][0];
  });
  UnionFind uf(n);
  bool merged = false;
  const double d2max = delta * delta;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& pa = ds.inputs[order[a]];
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& pb = ds.inputs[order[b]];
      if (pb[0] - pa[0] > delta) break;
      double d2 = 0;
      for (std::size_t k = 0; k < pa.size(); ++k) d2 += (pa[k] - pb[k]) * (pa[k] - pb[k]);
      if (d2 <= d2max) merged |= uf.unite(order[a], order[b]);
    }
  }
  if (!merged) return false;

  // Output rows are ordered by the smallest member of each cluster.
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[uf.find(i)].push_back(i);
  StaticDataset out;
  out.input_columns = ds.input_columns;
  out.value_column = ds.value_column;
  out.delta = ds.delta;
  for (const auto& [root, members] : clusters) {
    Point mean_x(ds.inputs[root].size(), 0.0);
    double mean_v = 0;
    for (auto m : members) {
      for (std::size_t k = 0; k < mean_x.size(); ++k) mean_x[k] += ds.inputs[m][k];
      mean_v += ds.values[m];
    }
    const auto cnt = static_cast<double>(members.size());
    for (double& x : mean_x) x /= cnt;
    out.inputs.push_back(std::move(mean_x));
    out.values.push_back(mean_v / cnt);
  }
  ds = std::move(out);
  return true;
}

}  // namespace detail

/// Single-linkage clustering at threshold delta (pairs at distance <= delta
/// link). Each multi-point cluster becomes one row holding the mean input
/// and mean value; passes repeat until no pair is within delta.
inline StaticDataset dedup_cluster(StaticDataset ds, double delta) {
  if (!(delta >= 0)) throw InvalidArgument("dedup tolerance must be nonnegative");
  if (ds.inputs.size() != ds.values.size())
    throw DimensionMismatch("dataset inputs and values differ in length");
  ds.delta = delta;
  while (detail::dedup_pass(ds, delta)) {
  }
  const std::size_t d = ds.dim();
  if (ds.size() < d + 1)
    throw EmptyAfterDedup("only " + std::to_string(ds.size()) +
                          " points survive deduplication; need d+1 = " + std::to_string(d + 1));
  return ds;
}

/// Lattice of p points per coordinate spanning [lo_pct, hi_pct] percentiles
/// of each input coordinate, endpoints included.
inline QuerySet percentile_lattice(const StaticDataset& ds, std::size_t p, double lo_pct = 25,
                                   double hi_pct = 75) {
  if (ds.size() == 0) throw DataError("percentile lattice of an empty dataset");
  if (p == 0) throw InvalidArgument("lattice needs at least one point per dimension");
  const std::size_t d = ds.dim();
  std::vector<std::vector<double>> axes;
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> col(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) col[i] = ds.inputs[i][k];
    const double lo = quantile(col, lo_pct / 100.0);
    const double hi = quantile(col, hi_pct / 100.0);
    if (!(hi > lo))
      throw DegenerateInterval("percentile interval of coordinate " + std::to_string(k) +
                               " is empty");
    axes.push_back(detail::axis(lo, hi, p));
  }
  return {detail::tensor_grid(axes), QueryProvenance::PercentileLattice, p};
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> shuffled_index(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
      f.remove_suffix(1);
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

}  // namespace detail

/// Reads a comma-separated table with a header row. `input_columns` name the
/// coordinates (in order) and `value_column` the function value.
inline StaticDataset read_csv_dataset(std::istream& in, const std::vector<std::string>& input_columns,
                                      const std::string& value_column) {
  if (input_columns.empty()) throw DataError("no input columns selected");
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError("column '" + name + "' not found in header");
  };
  std::vector<std::size_t> cols;
  for (const auto& c : input_columns) cols.push_back(column_of(c));
  const std::size_t vcol = column_of(value_column);

  StaticDataset ds;
  ds.input_columns = input_columns;
  ds.value_column = value_column;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    Point x(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (!detail::parse_double(fields[cols[k]], x[k]))
        throw DataError("row " + std::to_string(row) + ": cannot parse '" +
                        std::string(fields[cols[k]]) + "' as a number");
    double v = 0;
    if (!detail::parse_double(fields[vcol], v))
      throw DataError("row " + std::to_string(row) + ": cannot parse '" +
                      std::string(fields[vcol]) + "' as a number");
    ds.inputs.push_back(std::move(x));
    ds.values.push_back(v);
  }
  return ds;
}

inline StaticDataset read_csv_dataset(const std::string& path,
                                      const std::vector<std::string>& input_columns,
                                      const std::string& value_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return read_csv_dataset(in, input_columns, value_column);
}

}  // namespace ddd
