// Delaunay piecewise-linear interpolation at a single query point.
//
// The containing Delaunay simplex is found without building the
// triangulation: start from a Delaunay simplex incident to the sample
// nearest the query, then walk across the facet opposite the most negative
// barycentric weight, completing a new Delaunay simplex on the far side each
// time. Every step costs one O(n d) scan of the samples.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddd/errors.hpp"
#include "ddd/point_set.hpp"

namespace ddd {

/// d+1 vertex indices into a PointSet.
struct Simplex {
  std::vector<std::size_t> vertices;

  std::size_t size() const { return vertices.size(); }
  bool contains(std::size_t idx) const {
    return std::find(vertices.begin(), vertices.end(), idx) != vertices.end();
  }
};

struct Circumball {
  Point center;
  double radius = 0;
};

enum class WalkStatus { Interior, Extrapolation, Degenerate };

inline const char* to_string(WalkStatus s) {
  switch (s) {
    case WalkStatus::Interior: return "interior";
    case WalkStatus::Extrapolation: return "extrapolation";
    case WalkStatus::Degenerate: return "degenerate";
  }
  return "?";
}

struct WalkResult {
  Simplex simplex;
  std::vector<double> weights;
  WalkStatus status = WalkStatus::Degenerate;
  std::size_t flips = 0;
};

namespace detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline Eigen::Map<const VectorXd> as_vec(std::span<const double> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

inline void check_query(const PointSet& ps, std::span<const double> q) {
  if (q.size() != ps.dim())
    throw DimensionMismatch("query has dimension " + std::to_string(q.size()) +
                            ", point set has " + std::to_string(ps.dim()));
}

inline void check_enough_points(const PointSet& ps) {
  if (ps.size() < ps.dim() + 1)
    throw DegenerateInput("need at least d+1 = " + std::to_string(ps.dim() + 1) +
                          " points, have " + std::to_string(ps.size()));
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Edge matrix E with columns v_i - v_0, i = 1..m-1.
inline MatrixXd edge_matrix(const PointSet& ps, std::span<const std::size_t> idx) {
  const auto d = static_cast<Eigen::Index>(ps.dim());
  MatrixXd e(d, static_cast<Eigen::Index>(idx.size()) - 1);
  const auto v0 = as_vec(ps.point(idx[0]));
  for (std::size_t i = 1; i < idx.size(); ++i)
    e.col(static_cast<Eigen::Index>(i) - 1) = as_vec(ps.point(idx[i])) - v0;
  return e;
}

inline double longest_edge(const PointSet& ps, std::span<const std::size_t> idx) {
  double best = 0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j)
      best = std::max(best, sq_dist(ps.point(idx[i]), ps.point(idx[j])));
  return std::sqrt(best);
}

// |det E| / d! compared against vol_tol * (longest edge)^d.
inline bool simplex_is_degenerate(const PointSet& ps, const Simplex& s) {
  const MatrixXd e = edge_matrix(ps, s.vertices);
  double vol = std::abs(e.determinant());
  for (std::size_t k = 2; k <= ps.dim(); ++k) vol /= static_cast<double>(k);
  const double edge = longest_edge(ps, s.vertices);
  return !(vol > ps.tolerances().vol_tol * std::pow(edge, static_cast<double>(ps.dim())));
}

inline void check_simplex(const PointSet& ps, const Simplex& s) {
  if (s.size() != ps.dim() + 1)
    throw DimensionMismatch("simplex needs d+1 vertices");
  for (auto v : s.vertices)
    if (v >= ps.size()) throw InvalidArgument("simplex vertex index out of range");
  if (simplex_is_degenerate(ps, s))
    throw DegenerateSimplex("simplex vertices are affinely dependent");
}

// Circumcenter and unit normal of a facet (d vertices), the normal pointing
// away from `away_from`.
struct FacetFrame {
  VectorXd center;
  double radius2 = 0;
  VectorXd normal;
};

inline FacetFrame facet_frame(const PointSet& ps, std::span<const std::size_t> facet,
                              std::size_t away_from) {
  const auto d = static_cast<Eigen::Index>(ps.dim());
  const double tol = ps.tolerances().vol_tol * ps.scale();
  const auto v0 = as_vec(ps.point(facet[0]));
  FacetFrame f;
  if (d == 1) {
    f.center = v0;
    f.normal = VectorXd::Ones(1);
  } else {
    const MatrixXd e = edge_matrix(ps, facet);
    Eigen::HouseholderQR<MatrixXd> qr(e);
    const MatrixXd r = qr.matrixQR().topRows(d - 1).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d - 1; ++i)
      if (!(std::abs(r(i, i)) > tol))
        throw DegenerateFacet("facet vertices are affinely dependent");
    const MatrixXd q = qr.householderQ();
    f.normal = q.col(d - 1);
    const MatrixXd gram = e.transpose() * e;
    const VectorXd rhs = 0.5 * gram.diagonal();
    const VectorXd lambda = gram.ldlt().solve(rhs);
    f.center = v0 + e * lambda;
  }
  f.radius2 = (v0 - f.center).squaredNorm();
  const double side = f.normal.dot(as_vec(ps.point(away_from)) - v0);
  if (!(std::abs(side) > tol))
    throw DegenerateFacet("reference vertex lies in the facet hyperplane");
  if (side > 0) f.normal = -f.normal;
  return f;
}

}  // namespace detail

/// Index of the sample closest to q; ties go to the smallest index.
inline std::size_t nearest_vertex(const PointSet& ps, std::span<const double> q) {
  detail::check_query(ps, q);
  if (ps.empty()) throw InvalidArgument("nearest_vertex on an empty point set");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double d2 = detail::sq_dist(ps.point(i), q);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

/// Circumcenter and circumradius of a full-dimensional simplex.
inline Circumball circumball(const PointSet& ps, const Simplex& s) {
  detail::check_simplex(ps, s);
  const Eigen::MatrixXd e = detail::edge_matrix(ps, s.vertices);
  const Eigen::VectorXd rhs = 0.5 * e.colwise().squaredNorm().transpose();
  const Eigen::VectorXd offset = e.transpose().partialPivLu().solve(rhs);
  const Eigen::VectorXd c = detail::as_vec(ps.point(s.vertices[0])) + offset;
  return {Point(c.data(), c.data() + c.size()), offset.norm()};
}

/// True iff no sample lies strictly inside the open circumball of `s`
/// (a relative slack of 1e-10 of the radius separates "inside" from "on").
inline bool verify_empty_circumball(const PointSet& ps, const Simplex& s) {
  const Circumball ball = circumball(ps, s);
  const double limit = ball.radius * (1.0 - 1e-10);
  const double limit2 = limit * limit;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (s.contains(i)) continue;
    if (detail::sq_dist(ps.point(i), ball.center) < limit2) return false;
  }
  return true;
}

/// Solves [s_1 .. s_{d+1}; 1 .. 1] w = [q; 1].
inline std::vector<double> barycentric_coordinates(const PointSet& ps, const Simplex& s,
                                                   std::span<const double> q) {
  detail::check_query(ps, q);
  detail::check_simplex(ps, s);
  const auto d = static_cast<Eigen::Index>(ps.dim());
  Eigen::MatrixXd a(d + 1, d + 1);
  Eigen::VectorXd rhs(d + 1);
  for (Eigen::Index j = 0; j <= d; ++j) {
    a.col(j).head(d) = detail::as_vec(ps.point(s.vertices[static_cast<std::size_t>(j)]));
    a(d, j) = 1.0;
  }
  rhs.head(d) = detail::as_vec(q);
  rhs(d) = 1.0;
  const Eigen::VectorXd w = a.partialPivLu().solve(rhs);
  return {w.data(), w.data() + w.size()};
}

/// Completes `facet` (d vertex indices) to a Delaunay simplex on the side
/// opposite `away_from`. Among samples strictly beyond the facet hyperplane,
/// picks the one whose circumcenter has the smallest signed offset along the
/// outward normal; that simplex has an empty circumball. std::nullopt means
/// nothing lies beyond the facet, i.e. it is a convex-hull facet.
inline std::optional<std::size_t> complete_facet(const PointSet& ps,
                                                 std::span<const std::size_t> facet,
                                                 std::size_t away_from) {
  if (facet.size() != ps.dim()) throw DimensionMismatch("facet needs d vertices");
  const detail::FacetFrame f = detail::facet_frame(ps, facet, away_from);
  const auto d = ps.dim();
  const double side_tol = ps.tolerances().vol_tol * ps.scale();
  const double tie_tol = 1e-12 * ps.scale();
  const auto v0 = ps.point(facet[0]);

  std::optional<std::size_t> best;
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (i == away_from) continue;
    if (std::find(facet.begin(), facet.end(), i) != facet.end()) continue;
    const auto x = ps.point(i);
    double e = 0, w2 = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const double nk = f.normal[static_cast<Eigen::Index>(k)];
      const double wk = x[k] - f.center[static_cast<Eigen::Index>(k)];
      e += nk * (x[k] - v0[k]);
      w2 += wk * wk;
    }
    if (!(e > side_tol)) continue;
    const double t = (w2 - f.radius2) / (2.0 * e);
    if (t < best_t - tie_tol) {
      best_t = t;
      best = i;
    }
  }
  return best;
}

/// A Delaunay simplex incident to the sample nearest q.
///
/// Grows a Delaunay face one vertex at a time. The growth direction points
/// at the candidate that minimises the radius of the smallest ball through
/// the enlarged face; the appended vertex is the first sample met while the
/// empty ball through the current face slides in that direction, so every
/// intermediate face keeps an empty circumscribing ball.
inline Simplex build_seed_simplex(const PointSet& ps, std::span<const double> q) {
  detail::check_query(ps, q);
  detail::check_enough_points(ps);
  const std::size_t d = ps.dim();
  const double tol = ps.tolerances().vol_tol * ps.scale();
  const double tie_tol = 1e-12 * ps.scale() * ps.scale();

  const std::size_t v0_idx = nearest_vertex(ps, q);
  const auto v0 = ps.point(v0_idx);
  Simplex s{{v0_idx}};
  std::vector<char> in_face(ps.size(), 0);
  in_face[v0_idx] = 1;

  // Orthonormal basis of span(face - v0), one row per vector.
  std::vector<std::vector<double>> basis;
  std::vector<double> center(v0.begin(), v0.end());
  double radius2 = 0;
  std::vector<double> w(d), dir(d), face_center(d);

  auto project_out = [&](std::vector<double>& v) {
    for (const auto& b : basis) {
      double c = 0;
      for (std::size_t k = 0; k < d; ++k) c += b[k] * v[k];
      for (std::size_t k = 0; k < d; ++k) v[k] -= c * b[k];
    }
  };

  for (std::size_t step = 1; step <= d; ++step) {
    // Circumcenter of the face within its own affine hull.
    for (std::size_t k = 0; k < d; ++k) w[k] = center[k] - v0[k];
    project_out(w);
    for (std::size_t k = 0; k < d; ++k) face_center[k] = center[k] - w[k];
    const double face_r2 = detail::sq_dist(v0, face_center);

    // Candidate minimising the smallest circumradius of face + {x}.
    std::optional<std::size_t> cand;
    double cand_r2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (in_face[i]) continue;
      const auto x = ps.point(i);
      double a2 = 0;
      for (std::size_t k = 0; k < d; ++k) {
        w[k] = x[k] - v0[k];
        a2 += w[k] * w[k];
      }
      for (const auto& b : basis) {
        double c = 0;
        for (std::size_t k = 0; k < d; ++k) c += b[k] * w[k];
        a2 -= c * c;
      }
      if (!(a2 > tol * tol)) continue;
      const double h = 0.5 * (detail::sq_dist(x, face_center) - face_r2);
      const double r2 = face_r2 + h * h / a2;
      if (r2 < cand_r2 - tie_tol) {
        cand_r2 = r2;
        cand = i;
      }
    }
    if (!cand)
      throw DegenerateInput("samples lie in a hyperplane; no affinely independent completion");

    for (std::size_t k = 0; k < d; ++k) dir[k] = ps.point(*cand)[k] - v0[k];
    project_out(dir);
    project_out(dir);
    double len = 0;
    for (double v : dir) len += v * v;
    len = std::sqrt(len);
    for (double& v : dir) v /= len;

    // Slide the empty ball along dir; the first sample on its sphere joins.
    std::optional<std::size_t> hit;
    double hit_t = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (in_face[i]) continue;
      const auto x = ps.point(i);
      double e = 0;
      for (std::size_t k = 0; k < d; ++k) e += dir[k] * (x[k] - v0[k]);
      if (!(e > tol)) continue;
      const double t = (detail::sq_dist(x, center) - radius2) / (2.0 * e);
      if (t < hit_t) {
        hit_t = t;
        hit = i;
      }
    }
    if (!hit) throw DegenerateInput("seed simplex construction found no completion");

    for (std::size_t k = 0; k < d; ++k) center[k] += hit_t * dir[k];
    radius2 = detail::sq_dist(v0, center);
    s.vertices.push_back(*hit);
    in_face[*hit] = 1;

    std::vector<double> nb(d);
    for (std::size_t k = 0; k < d; ++k) nb[k] = ps.point(*hit)[k] - v0[k];
    project_out(nb);
    project_out(nb);
    double nlen = 0;
    for (double v : nb) nlen += v * v;
    nlen = std::sqrt(nlen);
    if (!(nlen > tol)) throw DegenerateInput("seed face became degenerate");
    for (double& v : nb) v /= nlen;
    basis.push_back(std::move(nb));
  }

  if (!verify_empty_circumball(ps, s))
    throw GeometryError("seed simplex failed the empty-circumball check");
  return s;
}

/// Locates the Delaunay simplex containing q.
inline WalkResult walk_to_containing_simplex(const PointSet& ps, std::span<const double> q) {
  WalkResult res;
  res.simplex = build_seed_simplex(ps, q);
  const auto& tol = ps.tolerances();
  const auto max_flips =
      static_cast<std::size_t>(tol.max_flips_factor * static_cast<double>(ps.size()));
  std::vector<std::size_t> facet;
  facet.reserve(ps.dim());

  for (;;) {
    res.weights = barycentric_coordinates(ps, res.simplex, q);
    const auto it = std::min_element(res.weights.begin(), res.weights.end());
    const auto j = static_cast<std::size_t>(it - res.weights.begin());
    if (*it >= -tol.weight_tol) {
      double sum = 0;
      for (double& wi : res.weights) {
        wi = std::max(wi, 0.0);
        sum += wi;
      }
      for (double& wi : res.weights) wi /= sum;
      res.status = WalkStatus::Interior;
      return res;
    }
    if (res.flips >= max_flips) {
      res.status = WalkStatus::Degenerate;
      return res;
    }
    facet.clear();
    for (std::size_t i = 0; i < res.simplex.size(); ++i)
      if (i != j) facet.push_back(res.simplex.vertices[i]);
    const auto next = complete_facet(ps, facet, res.simplex.vertices[j]);
    if (!next) {
      res.status = WalkStatus::Extrapolation;
      return res;
    }
    res.simplex.vertices[j] = *next;
    ++res.flips;
  }
}

/// Value of the Delaunay interpolant at q; std::nullopt outside the convex
/// hull. A walk that runs out of flips throws WalkDegenerate.
inline std::optional<double> interpolate(const PointSet& ps, std::span<const double> q) {
  const WalkResult r = walk_to_containing_simplex(ps, q);
  if (r.status == WalkStatus::Extrapolation) return std::nullopt;
  if (r.status == WalkStatus::Degenerate)
    throw WalkDegenerate("simplex walk exceeded " + std::to_string(r.flips) + " flips");
  double v = 0;
  for (std::size_t i = 0; i < r.weights.size(); ++i)
    v += r.weights[i] * ps.value(r.simplex.vertices[i]);
  return v;
}

}  // namespace ddd
