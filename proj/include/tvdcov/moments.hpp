#pragma once

#include <vector>

#include "tvdcov/density.hpp"
#include "tvdcov/geometry.hpp"
#include "tvdcov/quadrature.hpp"

namespace tvdcov {

/// Per-cell density moments at one time, positions frozen.
struct MomentSet {
  std::vector<double> mass;           // m_i
  std::vector<Point> first_moment;    // integral of q phi
  std::vector<Point> centroid;        // c_i
  std::vector<double> mass_rate;      // integral of dphi/dt
  std::vector<Point> centroid_rate;   // dc_i/dt at frozen positions
  std::vector<double> cell_cost;      // integral of |q - p_i|^2 phi

  std::size_t size() const { return mass.size(); }

  double locational_cost() const {
    double h = 0.0;
    for (double c : cell_cost) h += c;
    return h;
  }

  double max_tracking_error(std::span<const Point> positions) const {
    double e = 0.0;
    for (std::size_t i = 0; i < size(); ++i) e = std::max(e, (positions[i] - centroid[i]).norm());
    return e;
  }
};

// All integrals of a cell share one pass over the same nodes.
inline MomentSet moments(const Tessellation& tess, const DensitySnapshot& phi, const Quadrature& quad) {
  const std::size_t n = tess.size();
  MomentSet ms;
  ms.mass.resize(n);
  ms.first_moment.resize(n);
  ms.centroid.resize(n);
  ms.mass_rate.resize(n);
  ms.centroid_rate.resize(n);
  ms.cell_cost.resize(n);

  std::vector<WeightedPoint> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    quad.polygon_nodes(tess.cells[i], nodes);
    const Point& p = tess.positions[i];
    double m = 0.0, mt = 0.0, h = 0.0;
    Point fm = Point::Zero(), fmt = Point::Zero();
    for (const auto& node : nodes) {
      const auto [f, ft] = phi.value_and_rate(node.q);
      const double wf = node.w * f;
      const double wft = node.w * ft;
      m += wf;
      fm += wf * node.q;
      mt += wft;
      fmt += wft * node.q;
      h += wf * (node.q - p).squaredNorm();
    }
    ms.mass[i] = m;
    ms.first_moment[i] = fm;
    ms.centroid[i] = fm / m;
    ms.mass_rate[i] = mt;
    ms.centroid_rate[i] = (fmt - mt * ms.centroid[i]) / m;
    ms.cell_cost[i] = h;
  }
  return ms;
}

inline MomentSet moments(const Tessellation& tess, const DensityField& field, double t,
                         const Quadrature& quad) {
  return moments(tess, field.at(t), quad);
}

}  // namespace tvdcov
