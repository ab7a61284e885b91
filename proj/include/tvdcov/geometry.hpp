#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tvdcov/error.hpp"

namespace tvdcov {

using Point = Eigen::Vector2d;
using Polygon = std::vector<Point>;

struct Segment {
  Point a;
  Point b;

  double length() const { return (b - a).norm(); }
};

// Robots closer than this are rejected; their bisector is numerically meaningless.
inline constexpr double kCoincidenceTolerance = 1e-9;
// Shared boundaries shorter than this are vertex contacts, not faces.
inline constexpr double kMinFaceLength = 1e-9;

inline double cross(const Point& u, const Point& v) { return u.x() * v.y() - u.y() * v.x(); }

inline double polygon_area(std::span<const Point> poly) {
  const std::size_t m = poly.size();
  if (m < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t k = 0; k < m; ++k) twice += cross(poly[k], poly[(k + 1) % m]);
  return 0.5 * twice;
}

// Arithmetic mean of the vertices. Interior for any non-degenerate convex polygon.
inline Point vertex_centroid(std::span<const Point> poly) {
  Point s = Point::Zero();
  for (const auto& v : poly) s += v;
  return poly.empty() ? s : Point(s / static_cast<double>(poly.size()));
}

namespace detail {

// Convex polygon whose edge k (vertices[k] -> vertices[k+1]) carries labels[k].
// Non-negative labels name the robot whose bisector produced the edge; negative
// labels are domain edges.
struct LabeledPolygon {
  std::vector<Point> vertices;
  std::vector<int> labels;
};

inline void drop_duplicate_vertices(LabeledPolygon& poly) {
  auto& v = poly.vertices;
  auto& l = poly.labels;
  auto close = [](const Point& p, const Point& q) {
    return (p - q).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + p.lpNorm<Eigen::Infinity>());
  };
  bool changed = true;
  while (changed && v.size() >= 2) {
    changed = false;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const std::size_t next = (k + 1) % v.size();
      if (close(v[k], v[next])) {
        // The edge k is degenerate; the edge starting at next survives.
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(k));
        l.erase(l.begin() + static_cast<std::ptrdiff_t>(k));
        changed = true;
        break;
      }
    }
  }
  if (v.size() < 3) {
    v.clear();
    l.clear();
  }
}

// Intersects poly with {q : a.q <= b}; the new edge along the cut line gets `label`.
inline void clip_labeled(LabeledPolygon& poly, const Point& a, double b, int label) {
  const auto& v = poly.vertices;
  const std::size_t m = v.size();
  if (m == 0) return;
  const double scale = a.norm();
  std::vector<double> d(m);
  bool any_out = false;
  bool any_in = false;
  for (std::size_t k = 0; k < m; ++k) {
    d[k] = (a.dot(v[k]) - b) / scale;
    (d[k] > 0.0 ? any_out : any_in) = true;
  }
  if (!any_out) return;
  if (!any_in) {
    poly.vertices.clear();
    poly.labels.clear();
    return;
  }
  LabeledPolygon out;
  out.vertices.reserve(m + 1);
  out.labels.reserve(m + 1);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t next = (k + 1) % m;
    const bool in_cur = d[k] <= 0.0;
    const bool in_next = d[next] <= 0.0;
    if (in_cur) {
      out.vertices.push_back(v[k]);
      out.labels.push_back(poly.labels[k]);
    }
    if (in_cur != in_next) {
      const double s = d[k] / (d[k] - d[next]);
      out.vertices.push_back(v[k] + s * (v[next] - v[k]));
      out.labels.push_back(in_cur ? label : poly.labels[k]);
    }
  }
  drop_duplicate_vertices(out);
  poly = std::move(out);
}

}  // namespace detail

/// Intersection of a convex polygon with the half-plane {q : a.q <= b}.
/// Returns an empty polygon when nothing of positive area remains.
inline Polygon clip_halfplane(const Polygon& polygon, const Point& a, double b) {
  detail::LabeledPolygon poly{polygon, std::vector<int>(polygon.size(), -1)};
  detail::clip_labeled(poly, a, b, 0);
  return poly.vertices;
}

/// Convex polygonal domain, vertices counterclockwise.
class Domain {
 public:
  Domain() = default;

  explicit Domain(Polygon vertices) : vertices_(std::move(vertices)) { validate(); }

  static Domain box(double xmin, double ymin, double xmax, double ymax) {
    return Domain({Point(xmin, ymin), Point(xmax, ymin), Point(xmax, ymax), Point(xmin, ymax)});
  }

  const Polygon& vertices() const { return vertices_; }
  double area() const { return polygon_area(vertices_); }

  // Largest signed distance to the edge lines; negative strictly inside.
  double signed_distance(const Point& q) const {
    double worst = -std::numeric_limits<double>::infinity();
    const std::size_t m = vertices_.size();
    for (std::size_t k = 0; k < m; ++k) {
      const Point e = vertices_[(k + 1) % m] - vertices_[k];
      const Point outward(e.y(), -e.x());
      worst = std::max(worst, outward.dot(q - vertices_[k]) / outward.norm());
    }
    return worst;
  }

  bool contains(const Point& q, double margin = 0.0) const { return signed_distance(q) <= -margin; }

  // Nearest point of the domain shrunk inward by `margin`.
  Point clamp(const Point& q, double margin) const {
    if (contains(q, margin)) return q;
    Polygon inset = vertices_;
    const std::size_t m = vertices_.size();
    for (std::size_t k = 0; k < m; ++k) {
      const Point e = vertices_[(k + 1) % m] - vertices_[k];
      const Point n = Point(e.y(), -e.x()).normalized();
      inset = clip_halfplane(inset, n, n.dot(vertices_[k]) - margin);
    }
    if (inset.empty()) return vertex_centroid(vertices_);
    Point best = inset.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < inset.size(); ++k) {
      const Point& s0 = inset[k];
      const Point& s1 = inset[(k + 1) % inset.size()];
      const Point e = s1 - s0;
      const double u = std::clamp(e.dot(q - s0) / e.squaredNorm(), 0.0, 1.0);
      const Point cand = s0 + u * e;
      const double dist = (cand - q).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = cand;
      }
    }
    return best;
  }

 private:
  void validate() const {
    const std::size_t m = vertices_.size();
    if (m < 3) throw Error(ErrorCode::InvalidDomain, "domain needs at least 3 vertices");
    if (!(polygon_area(vertices_) > 0.0))
      throw Error(ErrorCode::InvalidDomain, "domain must be counterclockwise with positive area");
    for (std::size_t k = 0; k < m; ++k) {
      const Point e0 = vertices_[(k + 1) % m] - vertices_[k];
      const Point e1 = vertices_[(k + 2) % m] - vertices_[(k + 1) % m];
      if (cross(e0, e1) < 0.0) throw Error(ErrorCode::InvalidDomain, "domain must be convex");
    }
  }

  Polygon vertices_;
};

/// Voronoi partition of a convex domain.
struct Tessellation {
  std::vector<Point> positions;
  std::vector<Polygon> cells;
  // Faces keyed by (i, j) with i < j.
  std::map<std::pair<int, int>, Segment> faces;
  // Sorted neighbor lists, symmetric.
  std::vector<std::vector<int>> adjacency;

  std::size_t size() const { return positions.size(); }

  std::optional<Segment> boundary_segment(int i, int j) const {
    const int n = static_cast<int>(size());
    if (i < 0 || j < 0 || i >= n || j >= n || i == j)
      throw Error(ErrorCode::IndexOutOfRange,
                  "boundary_segment(" + std::to_string(i) + ", " + std::to_string(j) + ") with n=" +
                      std::to_string(n));
    const auto it = faces.find({std::min(i, j), std::max(i, j)});
    if (it == faces.end()) return std::nullopt;
    return it->second;
  }

  bool adjacent(int i, int j) const {
    const auto& nb = adjacency[static_cast<std::size_t>(i)];
    return std::binary_search(nb.begin(), nb.end(), j);
  }
};

inline Tessellation tessellate(std::span<const Point> positions, const Domain& domain,
                               double separation = kCoincidenceTolerance) {
  const std::size_t n = positions.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!positions[i].allFinite() || domain.signed_distance(positions[i]) >= 0.0)
      throw Error(ErrorCode::PositionOutsideDomain,
                  "robot " + std::to_string(i) + " is not strictly inside the domain");
    for (std::size_t j = 0; j < i; ++j) {
      if ((positions[i] - positions[j]).norm() < separation)
        throw Error(ErrorCode::CoincidentRobots,
                    "robots " + std::to_string(j) + " and " + std::to_string(i) + " coincide");
    }
  }

  Tessellation tess;
  tess.positions.assign(positions.begin(), positions.end());
  tess.cells.resize(n);
  tess.adjacency.assign(n, {});

  const auto& dv = domain.vertices();
  std::vector<int> domain_labels(dv.size());
  for (std::size_t k = 0; k < dv.size(); ++k) domain_labels[k] = -1 - static_cast<int>(k);

  for (std::size_t i = 0; i < n; ++i) {
    detail::LabeledPolygon cell{dv, domain_labels};
    const Point& pi = positions[i];
    for (std::size_t j = 0; j < n && !cell.vertices.empty(); ++j) {
      if (j == i) continue;
      const Point a = positions[j] - pi;
      const Point mid = 0.5 * (positions[j] + pi);
      detail::clip_labeled(cell, a, a.dot(mid), static_cast<int>(j));
    }
    const std::size_t m = cell.vertices.size();
    for (std::size_t k = 0; k < m; ++k) {
      const int j = cell.labels[k];
      if (j <= static_cast<int>(i)) continue;  // domain edge, or owned by the lower index
      Segment s{cell.vertices[k], cell.vertices[(k + 1) % m]};
      if (s.length() > kMinFaceLength) {
        tess.faces.emplace(std::make_pair(static_cast<int>(i), j), s);
        tess.adjacency[i].push_back(j);
        tess.adjacency[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
      }
    }
    tess.cells[i] = std::move(cell.vertices);
  }
  for (auto& nb : tess.adjacency) std::sort(nb.begin(), nb.end());
  return tess;
}

inline Tessellation tessellate(const std::vector<Point>& positions, const Domain& domain,
                               double separation = kCoincidenceTolerance) {
  return tessellate(std::span<const Point>(positions), domain, separation);
}

/// Edge distances from `source` in the adjacency (Delaunay) graph; -1 if unreachable.
inline std::vector<int> hop_distances(const Tessellation& tess, int source) {
  std::vector<int> dist(tess.size(), -1);
  std::queue<int> frontier;
  dist[static_cast<std::size_t>(source)] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int w : tess.adjacency[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(w)] < 0) {
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
        frontier.push(w);
      }
    }
  }
  return dist;
}

}  // namespace tvdcov
