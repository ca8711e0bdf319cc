// Gradient of the Delaunay interpolant.
//
// Over one simplex the interpolant is affine, so its graph is a flat piece
// of a hypersurface in R^{d+1}. The normal of that piece is the last right
// singular vector of the centered (d+1)x(d+1) matrix whose rows are
// (s_l, f(s_l)); scaling its last coordinate to -1 leaves (grad f, -1).
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ddd/errors.hpp"
#include "ddd/geometry.hpp"
#include "ddd/point_set.hpp"

namespace ddd {

struct GradientResult {
  std::vector<double> gradient;
  WalkStatus status = WalkStatus::Degenerate;
};

/// `vertices` holds d+1 points (each of size d), `values` their samples.
inline std::vector<double> simplex_gradient(std::span<const Point> vertices,
                                            std::span<const double> values) {
  const std::size_t m = vertices.size();
  if (m < 2 || values.size() != m) throw DimensionMismatch("simplex_gradient needs d+1 vertices");
  const std::size_t d = m - 1;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t l = 0; l < m; ++l) {
    if (vertices[l].size() != d) throw DimensionMismatch("vertex has wrong dimension");
    for (std::size_t k = 0; k < d; ++k)
      a(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = vertices[l][k];
    a(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(d)) = values[l];
  }
  a.rowwise() -= a.colwise().mean();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd normal = svd.matrixV().col(static_cast<Eigen::Index>(d));
  const double last = normal(static_cast<Eigen::Index>(d));
  if (!(std::abs(last) >= 1e-12))
    throw DegenerateSimplex("interpolant surface normal is horizontal (vertical facet)");
  std::vector<double> g(d);
  for (std::size_t k = 0; k < d; ++k) g[k] = -normal(static_cast<Eigen::Index>(k)) / last;
  return g;
}

/// Gradient of the simplex that `walk` located.
inline std::vector<double> simplex_gradient(const PointSet& ps, const Simplex& s) {
  std::vector<Point> verts;
  std::vector<double> vals;
  verts.reserve(s.size());
  vals.reserve(s.size());
  for (auto v : s.vertices) {
    const auto p = ps.point(v);
    verts.emplace_back(p.begin(), p.end());
    vals.push_back(ps.value(v));
  }
  return simplex_gradient(verts, vals);
}

inline GradientResult interpolant_gradient(const PointSet& ps, std::span<const double> q) {
  const WalkResult r = walk_to_containing_simplex(ps, q);
  GradientResult g;
  g.status = r.status;
  if (r.status == WalkStatus::Degenerate)
    throw WalkDegenerate("simplex walk exceeded " + std::to_string(r.flips) + " flips");
  if (r.status == WalkStatus::Interior) g.gradient = simplex_gradient(ps, r.simplex);
  return g;
}

/// Value and gradient from one walk.
struct Evaluation {
  std::optional<double> value;
  std::optional<std::vector<double>> gradient;
};

inline Evaluation evaluate(const PointSet& ps, std::span<const double> q) {
  const WalkResult r = walk_to_containing_simplex(ps, q);
  if (r.status == WalkStatus::Degenerate)
    throw WalkDegenerate("simplex walk exceeded " + std::to_string(r.flips) + " flips");
  Evaluation e;
  if (r.status == WalkStatus::Extrapolation) return e;
  double v = 0;
  for (std::size_t i = 0; i < r.weights.size(); ++i)
    v += r.weights[i] * ps.value(r.simplex.vertices[i]);
  e.value = v;
  e.gradient = simplex_gradient(ps, r.simplex);
  return e;
}

}  // namespace ddd
