// Immutable scattered sample set in R^d with scalar values.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddd/errors.hpp"

namespace ddd {

/// Numerical slacks used by the geometric predicates. All are relative to
/// the bounding-box diagonal of the point cloud unless noted.
struct GeometryTolerances {
  double weight_tol = 1e-8;     // barycentric weights >= -weight_tol count as inside
  double vol_tol = 1e-12;       // affine-independence threshold
  double dup_tol = 1e-12;       // duplicate-point threshold
  double max_flips_factor = 10; // walk gives up after factor * n flips

  void validate() const {
    if (!(weight_tol > 0 && vol_tol > 0 && dup_tol > 0 && max_flips_factor > 0))
      throw InvalidArgument("geometry tolerances must be strictly positive");
  }
};

using Point = std::vector<double>;

class PointSet {
 public:
  PointSet() = default;

  /// `coords` holds n*dim values, point-major.
  PointSet(std::size_t dim, std::vector<double> coords, std::vector<double> values,
           const GeometryTolerances& tol = {})
      : dim_(dim), coords_(std::move(coords)), values_(std::move(values)), tol_(tol) {
    tol_.validate();
    if (dim_ == 0) throw InvalidArgument("point set dimension must be positive");
    if (coords_.size() % dim_ != 0)
      throw DimensionMismatch("coordinate buffer is not a multiple of the dimension");
    if (coords_.size() / dim_ != values_.size())
      throw DimensionMismatch("number of values does not match number of points");
    compute_scale();
    check_duplicates();
  }

  static PointSet from_points(const std::vector<Point>& pts, std::vector<double> values,
                              const GeometryTolerances& tol = {}) {
    if (pts.empty()) throw InvalidArgument("point set needs at least one point");
    const std::size_t d = pts.front().size();
    std::vector<double> flat;
    flat.reserve(pts.size() * d);
    for (const auto& p : pts) {
      if (p.size() != d) throw DimensionMismatch("points have inconsistent dimension");
      flat.insert(flat.end(), p.begin(), p.end());
    }
    return PointSet(d, std::move(flat), std::move(values), tol);
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  double value(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<const double> coords() const { return coords_; }

  const GeometryTolerances& tolerances() const { return tol_; }

  /// Bounding-box diagonal; the length scale for every relative tolerance.
  double scale() const { return scale_; }

 private:
  void compute_scale() {
    if (empty()) {
      scale_ = 0;
      return;
    }
    double s2 = 0;
    for (std::size_t k = 0; k < dim_; ++k) {
      double lo = coords_[k], hi = coords_[k];
      for (std::size_t i = 1; i < size(); ++i) {
        lo = std::min(lo, coords_[i * dim_ + k]);
        hi = std::max(hi, coords_[i * dim_ + k]);
      }
      s2 += (hi - lo) * (hi - lo);
    }
    scale_ = std::sqrt(s2);
  }

  // Sweep along the first coordinate; only pairs within the tolerance
  // window in that coordinate are compared in full.
  void check_duplicates() const {
    if (size() < 2) return;
    const double tol = tol_.dup_tol * scale_;
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return coords_[a * dim_] < coords_[b * dim_];
    });
    for (std::size_t a = 0; a < order.size(); ++a) {
      const auto pa = point(order[a]);
      for (std::size_t b = a + 1; b < order.size(); ++b) {
        const auto pb = point(order[b]);
        if (pb[0] - pa[0] > tol) break;
        double d2 = 0;
        for (std::size_t k = 0; k < dim_; ++k) d2 += (pa[k] - pb[k]) * (pa[k] - pb[k]);
        if (std::sqrt(d2) <= tol) {
          auto lo = std::min(order[a], order[b]);
          auto hi = std::max(order[a], order[b]);
          throw DegenerateInput("points " + std::to_string(lo) + " and " +
                                std::to_string(hi) + " are duplicates");
        }
      }
    }
  }

  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> values_;
  GeometryTolerances tol_;
  double scale_ = 0;
};

}  // namespace ddd
