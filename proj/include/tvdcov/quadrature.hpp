#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tvdcov/error.hpp"
#include "tvdcov/geometry.hpp"

namespace tvdcov {

struct QuadratureConfig {
  int triangle_rule_degree = 6;
  int segment_nodes = 8;
  int subdivision_depth = 2;
};

struct WeightedPoint {
  Point q;
  double w;
};

namespace detail {

struct TriangleRule {
  int degree = 0;
  std::vector<std::array<double, 3>> barycentric;
  std::vector<double> weights;  // sum to one

  void centroid(double w) {
    barycentric.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
    weights.push_back(w);
  }
  void orbit3(double a, double w) {
    const double c = 1.0 - 2.0 * a;
    barycentric.push_back({a, a, c});
    barycentric.push_back({a, c, a});
    barycentric.push_back({c, a, a});
    weights.insert(weights.end(), 3, w);
  }
  void orbit6(double a, double b, double w) {
    const double c = 1.0 - a - b;
    for (const auto& p : {std::array{a, b, c}, std::array{a, c, b}, std::array{b, a, c},
                          std::array{b, c, a}, std::array{c, a, b}, std::array{c, b, a}}) {
      barycentric.push_back(p);
      weights.push_back(w);
    }
  }
};

// Symmetric Dunavant rules with positive weights and interior nodes.
inline TriangleRule dunavant_rule(int degree) {
  TriangleRule r;
  if (degree <= 1) {
    r.degree = 1;
    r.centroid(1.0);
  } else if (degree == 2) {
    r.degree = 2;
    r.orbit3(1.0 / 6.0, 1.0 / 3.0);
  } else if (degree <= 4) {
    r.degree = 4;
    r.orbit3(0.44594849091596488632, 0.22338158967801146570);
    r.orbit3(0.09157621350977074346, 0.10995174365532186764);
  } else if (degree == 5) {
    r.degree = 5;
    r.centroid(0.225);
    r.orbit3(0.47014206410511508977, 0.13239415278850618074);
    r.orbit3(0.10128650732345633880, 0.12593918054482715260);
  } else if (degree == 6) {
    r.degree = 6;
    r.orbit3(0.24928674517091042129, 0.11678627572637936603);
    r.orbit3(0.06308901449150222834, 0.05084490637020681692);
    r.orbit6(0.31035245103378440542, 0.63650249912139864723, 0.08285107561837357519);
  } else if (degree <= 8) {
    r.degree = 8;
    r.centroid(0.14431560767778716825);
    r.orbit3(0.17056930775176020662, 0.10321737053471825028);
    r.orbit3(0.05054722831703097546, 0.03245849762319808031);
    r.orbit3(0.45929258829272315603, 0.09509163426728462479);
    r.orbit6(0.26311282963463811342, 0.72849239295540428124, 0.02723031417443499426);
  } else {
    throw Error(ErrorCode::InvalidScenario,
                "triangle rule degree " + std::to_string(degree) + " unsupported (max 8)");
  }
  double total = 0.0;
  for (double w : r.weights) total += w;
  for (double& w : r.weights) w /= total;
  return r;
}

// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      // n == 1 leaves p1 = x, p0 = 1
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

}  // namespace detail

/// Precomputed rules for one QuadratureConfig.
class Quadrature {
 public:
  explicit Quadrature(const QuadratureConfig& cfg = {}) : cfg_(cfg) {
    if (cfg.triangle_rule_degree < 2)
      throw Error(ErrorCode::InvalidScenario, "triangle_rule_degree must be >= 2");
    if (cfg.segment_nodes < 2) throw Error(ErrorCode::InvalidScenario, "segment_nodes must be >= 2");
    if (cfg.subdivision_depth < 0)
      throw Error(ErrorCode::InvalidScenario, "subdivision_depth must be >= 0");
    triangle_ = detail::dunavant_rule(cfg.triangle_rule_degree);
    detail::gauss_legendre(cfg.segment_nodes, gl_nodes_, gl_weights_);
  }

  const QuadratureConfig& config() const { return cfg_; }
  int triangle_degree() const { return triangle_.degree; }

  // Nodes and weights realizing the integral over a convex polygon: fan from
  // the vertex centroid, each triangle split 4^depth times.
  void polygon_nodes(std::span<const Point> polygon, std::vector<WeightedPoint>& out) const {
    out.clear();
    if (polygon.size() < 3) throw Error(ErrorCode::EmptyPolygon, "cannot integrate over an empty polygon");
    const Point g = vertex_centroid(polygon);
    const std::size_t per = triangle_.weights.size() << (2 * cfg_.subdivision_depth);
    out.reserve(polygon.size() * per);
    for (std::size_t k = 0; k < polygon.size(); ++k)
      add_triangle(g, polygon[k], polygon[(k + 1) % polygon.size()], cfg_.subdivision_depth, out);
  }

  void segment_nodes(const Segment& s, std::vector<WeightedPoint>& out) const {
    out.clear();
    const double len = s.length();
    if (!(len > 0.0)) throw Error(ErrorCode::DegenerateSegment, "segment has zero length");
    const Point mid = 0.5 * (s.a + s.b);
    const Point half = 0.5 * (s.b - s.a);
    for (std::size_t k = 0; k < gl_nodes_.size(); ++k)
      out.push_back({mid + gl_nodes_[k] * half, 0.5 * len * gl_weights_[k]});
  }

 private:
  void add_triangle(const Point& a, const Point& b, const Point& c, int depth,
                    std::vector<WeightedPoint>& out) const {
    if (depth > 0) {
      const Point ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
      add_triangle(a, ab, ca, depth - 1, out);
      add_triangle(ab, b, bc, depth - 1, out);
      add_triangle(ca, bc, c, depth - 1, out);
      add_triangle(ab, bc, ca, depth - 1, out);
      return;
    }
    const double area = 0.5 * std::abs(cross(b - a, c - a));
    if (area == 0.0) return;
    for (std::size_t k = 0; k < triangle_.weights.size(); ++k) {
      const auto& l = triangle_.barycentric[k];
      out.push_back({l[0] * a + l[1] * b + l[2] * c, area * triangle_.weights[k]});
    }
  }

  QuadratureConfig cfg_;
  detail::TriangleRule triangle_;
  std::vector<double> gl_nodes_;
  std::vector<double> gl_weights_;
};

template <class F>
double polygon_integral(F&& f, std::span<const Point> polygon, const Quadrature& quad) {
  std::vector<WeightedPoint> nodes;
  quad.polygon_nodes(polygon, nodes);
  double sum = 0.0;
  for (const auto& n : nodes) sum += n.w * f(n.q);
  return sum;
}

template <class F>
double polygon_integral(F&& f, const Polygon& polygon, const Quadrature& quad) {
  return polygon_integral(std::forward<F>(f), std::span<const Point>(polygon), quad);
}

template <class F>
double segment_integral(F&& f, const Segment& segment, const Quadrature& quad) {
  std::vector<WeightedPoint> nodes;
  quad.segment_nodes(segment, nodes);
  double sum = 0.0;
  for (const auto& n : nodes) sum += n.w * f(n.q);
  return sum;
}

}  // namespace tvdcov
