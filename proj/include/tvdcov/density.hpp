#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "tvdcov/error.hpp"
#include "tvdcov/geometry.hpp"

namespace tvdcov {

inline constexpr double kDefaultDensityFloor = 1e-6;

/// Position, velocity and acceleration of a moving point at one instant.
struct PathState {
  Point position = Point::Zero();
  Point velocity = Point::Zero();
  Point acceleration = Point::Zero();
};

struct FixedPath {
  Point center = Point::Zero();

  PathState at(double) const { return {center, Point::Zero(), Point::Zero()}; }
};

// center + radius * (cos(w t + phase), sin(w t + phase)), w = direction / tau.
struct CircularPath {
  Point center = Point::Zero();
  double radius = 0.0;
  double tau = 1.0;
  double phase = 0.0;
  double direction = 1.0;

  PathState at(double t) const {
    const double w = direction / tau;
    const double a = w * t + phase;
    const Point u(std::cos(a), std::sin(a));
    const Point du(-u.y(), u.x());
    return {center + radius * u, radius * w * du, -radius * w * w * u};
  }
};

// origin + amplitude .* sin(t / tau + phase), per axis.
struct SinusoidalPath {
  Point origin = Point::Zero();
  Point amplitude = Point::Zero();
  double tau = 1.0;
  Point phase = Point::Zero();

  PathState at(double t) const {
    PathState s;
    for (int k = 0; k < 2; ++k) {
      const double a = t / tau + phase[k];
      s.position[k] = origin[k] + amplitude[k] * std::sin(a);
      s.velocity[k] = amplitude[k] * std::cos(a) / tau;
      s.acceleration[k] = -amplitude[k] * std::sin(a) / (tau * tau);
    }
    return s;
  }
};

struct Knot {
  double t = 0.0;
  PathState state;
};

// Piecewise quintic Hermite interpolation through knots carrying position,
// velocity and acceleration, which makes the path C2. Holds still outside the
// knot span.
struct WaypointPath {
  std::vector<Knot> knots;

  // Knots from (t, x, y) samples: interior velocities by central differences,
  // zero velocity at the ends, zero acceleration everywhere.
  static WaypointPath through(const std::vector<std::pair<double, Point>>& samples) {
    WaypointPath path;
    const std::size_t m = samples.size();
    for (std::size_t k = 0; k < m; ++k) {
      Knot knot;
      knot.t = samples[k].first;
      knot.state.position = samples[k].second;
      if (k > 0 && k + 1 < m) {
        knot.state.velocity = (samples[k + 1].second - samples[k - 1].second) /
                              (samples[k + 1].first - samples[k - 1].first);
      }
      path.knots.push_back(knot);
    }
    return path;
  }

  PathState at(double t) const {
    if (knots.empty()) return {};
    if (t < knots.front().t || knots.size() == 1)
      return {knots.front().state.position, Point::Zero(), Point::Zero()};
    if (t > knots.back().t) return {knots.back().state.position, Point::Zero(), Point::Zero()};
    auto it = std::upper_bound(knots.begin(), knots.end(), t,
                               [](double v, const Knot& k) { return v < k.t; });
    if (it == knots.end()) --it;
    const Knot& k1 = *it;
    const Knot& k0 = *(it - 1);
    const double h = k1.t - k0.t;
    const double s = (t - k0.t) / h;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const PathState& a = k0.state;
    const PathState& b = k1.state;

    const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double h1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    const double h3 = 0.5 * s3 - s4 + 0.5 * s5;
    const double h4 = -4 * s3 + 7 * s4 - 3 * s5;
    const double h5 = 10 * s3 - 15 * s4 + 6 * s5;

    const double d0 = -30 * s2 + 60 * s3 - 30 * s4;
    const double d1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
    const double d2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4;
    const double d3 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
    const double d4 = -12 * s2 + 28 * s3 - 15 * s4;
    const double d5 = 30 * s2 - 60 * s3 + 30 * s4;

    const double e0 = -60 * s + 180 * s2 - 120 * s3;
    const double e1 = -36 * s + 96 * s2 - 60 * s3;
    const double e2 = 1 - 9 * s + 18 * s2 - 10 * s3;
    const double e3 = 3 * s - 12 * s2 + 10 * s3;
    const double e4 = -24 * s + 84 * s2 - 60 * s3;
    const double e5 = 60 * s - 180 * s2 + 120 * s3;

    PathState out;
    out.position = h0 * a.position + h * h1 * a.velocity + h * h * h2 * a.acceleration +
                   h * h * h3 * b.acceleration + h * h4 * b.velocity + h5 * b.position;
    out.velocity = (d0 * a.position + h * d1 * a.velocity + h * h * d2 * a.acceleration +
                    h * h * d3 * b.acceleration + h * d4 * b.velocity + d5 * b.position) /
                   h;
    out.acceleration = (e0 * a.position + h * e1 * a.velocity + h * h * e2 * a.acceleration +
                        h * h * e3 * b.acceleration + h * e4 * b.velocity + e5 * b.position) /
                       (h * h);
    return out;
  }
};

using CenterPath = std::variant<FixedPath, CircularPath, SinusoidalPath, WaypointPath>;

inline PathState path_state(const CenterPath& path, double t) {
  return std::visit([t](const auto& p) { return p.at(t); }, path);
}

inline const char* path_type_name(const CenterPath& path) {
  switch (path.index()) {
    case 0: return "fixed";
    case 1: return "circular";
    case 2: return "sinusoidal";
    default: return "waypoints";
  }
}

// weight(t) = weight * (1 + depth * sin(t / tau + phase)); depth in [0, 1).
struct WeightPulse {
  double depth = 0.0;
  double tau = 1.0;
  double phase = 0.0;
};

struct GaussianComponent {
  double weight = 1.0;
  CenterPath path = FixedPath{};
  // Multipliers of the squared coordinate deviations in the exponent.
  Point inverse_scales = Point::Ones();
  WeightPulse pulse;

  double weight_at(double t) const {
    return weight * (1.0 + pulse.depth * std::sin(t / pulse.tau + pulse.phase));
  }
  double weight_rate_at(double t) const {
    return weight * pulse.depth * std::cos(t / pulse.tau + pulse.phase) / pulse.tau;
  }
};

/// Density frozen at one instant: everything time-dependent is pre-evaluated
/// so that per-point work is one exponential per component.
class DensitySnapshot {
 public:
  struct Term {
    double weight;
    double weight_rate;
    Point center;
    Point center_velocity;
    Point inverse_scales;
  };

  double floor = kDefaultDensityFloor;
  std::vector<Term> terms;

  double value(const Point& q) const {
    double phi = floor;
    for (const auto& c : terms) phi += c.weight * exponential(c, q);
    return phi;
  }

  // phi and d(phi)/dt at q.
  std::pair<double, double> value_and_rate(const Point& q) const {
    double phi = floor;
    double rate = 0.0;
    for (const auto& c : terms) {
      const double e = exponential(c, q);
      const Point d = q - c.center;
      // d/dt of -(s_x dx^2 + s_y dy^2) is 2 s . (d .* cdot)
      const double drift = 2.0 * (c.inverse_scales.x() * d.x() * c.center_velocity.x() +
                                  c.inverse_scales.y() * d.y() * c.center_velocity.y());
      phi += c.weight * e;
      rate += e * (c.weight_rate + c.weight * drift);
    }
    return {phi, rate};
  }

  Point gradient(const Point& q) const {
    Point g = Point::Zero();
    for (const auto& c : terms) {
      const double e = c.weight * exponential(c, q);
      const Point d = q - c.center;
      g.x() -= 2.0 * c.inverse_scales.x() * d.x() * e;
      g.y() -= 2.0 * c.inverse_scales.y() * d.y() * e;
    }
    return g;
  }

 private:
  static double exponential(const Term& c, const Point& q) {
    const double dx = q.x() - c.center.x();
    const double dy = q.y() - c.center.y();
    return std::exp(-(c.inverse_scales.x() * dx * dx + c.inverse_scales.y() * dy * dy));
  }
};

/// phi(q, t) = floor + sum_k weight_k(t) exp(-(s_x (q_x - c_x(t))^2 + s_y (q_y - c_y(t))^2)).
class DensityField {
 public:
  DensityField() = default;
  DensityField(std::vector<GaussianComponent> components, double floor = kDefaultDensityFloor)
      : components_(std::move(components)), floor_(floor) {
    validate();
  }

  const std::vector<GaussianComponent>& components() const { return components_; }
  std::vector<GaussianComponent>& components() { return components_; }
  double floor() const { return floor_; }

  DensitySnapshot at(double t) const {
    DensitySnapshot s;
    s.floor = floor_;
    s.terms.reserve(components_.size());
    for (const auto& c : components_) {
      const PathState ps = path_state(c.path, t);
      s.terms.push_back({c.weight_at(t), c.weight_rate_at(t), ps.position, ps.velocity, c.inverse_scales});
    }
    return s;
  }

  double eval(const Point& q, double t) const { return at(t).value(q); }
  double eval_dt(const Point& q, double t) const { return at(t).value_and_rate(q).second; }
  Point gradient(const Point& q, double t) const { return at(t).gradient(q); }

  void validate() const {
    if (!(floor_ > 0.0) || !std::isfinite(floor_))
      throw Error(ErrorCode::InvalidDensity, "density floor must be positive");
    for (const auto& c : components_) {
      if (!(c.weight > 0.0) || !std::isfinite(c.weight))
        throw Error(ErrorCode::InvalidDensity, "component weight must be positive");
      if (!(c.inverse_scales.x() > 0.0) || !(c.inverse_scales.y() > 0.0))
        throw Error(ErrorCode::InvalidDensity, "component scales must be positive");
      if (!(c.pulse.depth >= 0.0 && c.pulse.depth < 1.0) || !(c.pulse.tau > 0.0))
        throw Error(ErrorCode::InvalidDensity, "weight pulse needs depth in [0, 1) and tau > 0");
      const bool bad_tau = std::visit(
          [](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, CircularPath> || std::is_same_v<P, SinusoidalPath>)
              return !(p.tau > 0.0);
            else if constexpr (std::is_same_v<P, WaypointPath>) {
              for (std::size_t k = 1; k < p.knots.size(); ++k)
                if (!(p.knots[k].t > p.knots[k - 1].t)) return true;
              return false;
            } else
              return false;
          },
          c.path);
      if (bad_tau)
        throw Error(ErrorCode::InvalidDensity, "path time constants must be positive and knots increasing");
    }
  }

 private:
  std::vector<GaussianComponent> components_;
  double floor_ = kDefaultDensityFloor;
};

/// Smoothly redirects a component's center to `target`, reached `duration`
/// seconds after `t_now`. The new path matches position, velocity and
/// acceleration of the old one at t_now.
inline void retarget_component(GaussianComponent& c, double t_now, const Point& target,
                               double duration) {
  WaypointPath path;
  path.knots.push_back({t_now, path_state(c.path, t_now)});
  path.knots.push_back({t_now + duration, {target, Point::Zero(), Point::Zero()}});
  c.path = std::move(path);
}

inline constexpr double kBuiltinTau = 5.0;

/// Built-in densities. phi1 and phi2 are the reference pair; phi3, phi4 and
/// phi5 are synthetic stand-ins (formulas in docs/densities.md):
///   phi3: two unit Gaussians on a radius-1.5 circle, rotating in opposite
///         directions (angles t/tau and pi - t/tau).
///   phi4: a unit Gaussian on the radius-2 circle plus a fixed Gaussian at
///         (-1.5, 1.5), scales (2, 2), whose weight 1 + 0.9999 sin(t/tau)
///         nearly vanishes once per period.
///   phi5: an anisotropic Gaussian, scales (2, 0.5), moving along
///         (2 sin(t/tau), cos(t/tau)).
inline DensityField builtin_density(std::string_view name, double floor = kDefaultDensityFloor) {
  const double tau = kBuiltinTau;
  GaussianComponent g;
  if (name == "phi1") {
    g.path = SinusoidalPath{Point::Zero(), Point(2.0, 0.0), tau, Point::Zero()};
    g.inverse_scales = Point(1.0, 1.0 / 16.0);
    return DensityField({g}, floor);
  }
  if (name == "phi2") {
    g.path = CircularPath{Point::Zero(), 2.0, tau, 0.0, 1.0};
    return DensityField({g}, floor);
  }
  if (name == "phi3") {
    GaussianComponent h = g;
    g.path = CircularPath{Point::Zero(), 1.5, tau, 0.0, 1.0};
    h.path = CircularPath{Point::Zero(), 1.5, tau, std::numbers::pi, -1.0};
    return DensityField({g, h}, floor);
  }
  if (name == "phi4") {
    GaussianComponent h;
    g.path = CircularPath{Point::Zero(), 2.0, tau, 0.0, 1.0};
    h.path = FixedPath{Point(-1.5, 1.5)};
    h.inverse_scales = Point(2.0, 2.0);
    h.pulse = WeightPulse{0.9999, tau, 0.0};
    return DensityField({g, h}, floor);
  }
  if (name == "phi5") {
    g.path = SinusoidalPath{Point::Zero(), Point(2.0, 1.0), tau, Point(0.0, std::numbers::pi / 2)};
    g.inverse_scales = Point(2.0, 0.5);
    return DensityField({g}, floor);
  }
  throw Error(ErrorCode::UnknownDensity, "no builtin density named '" + std::string(name) + "'");
}

}  // namespace tvdcov
