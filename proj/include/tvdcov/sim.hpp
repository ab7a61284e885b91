#pragma once

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "tvdcov/controllers.hpp"
#include "tvdcov/density.hpp"
#include "tvdcov/error.hpp"
#include "tvdcov/geometry.hpp"
#include "tvdcov/jacobian.hpp"
#include "tvdcov/moments.hpp"
#include "tvdcov/quadrature.hpp"

namespace tvdcov {

/// H(p, t): sum over cells of the integral of |q - p_i|^2 phi(q, t).
inline double locational_cost(const Tessellation& tess, const DensityField& field, double t,
                              const Quadrature& quad) {
  const DensitySnapshot phi = field.at(t);
  double h = 0.0;
  for (std::size_t i = 0; i < tess.size(); ++i) {
    const Point& p = tess.positions[i];
    h += polygon_integral([&](const Point& q) { return (q - p).squaredNorm() * phi.value(q); },
                          tess.cells[i], quad);
  }
  return h;
}

/// dH/dp_i = 2 m_i (p_i - c_i).
inline std::vector<Point> cost_gradient(const Tessellation& tess, const MomentSet& ms) {
  std::vector<Point> g(tess.size());
  for (std::size_t i = 0; i < tess.size(); ++i) g[i] = 2.0 * ms.mass[i] * (tess.positions[i] - ms.centroid[i]);
  return g;
}

struct UnicycleInput {
  double v = 0.0;
  double omega = 0.0;
};

/// v = |pdot|, omega = [-sin(theta) cos(theta)] . pdot / |pdot|; (0, 0) at standstill.
inline UnicycleInput unicycle_map(const Point& pdot, double heading) {
  const double speed = pdot.norm();
  if (speed < 1e-9) return {};
  return {speed, (-std::sin(heading) * pdot.x() + std::cos(heading) * pdot.y()) / speed};
}

inline constexpr double kClampMargin = 1e-6;

/// Everything that defines the closed-loop vector field at one instant.
struct Dynamics {
  Domain domain = Domain::box(-3, -3, 3, 3);
  DensityField density;
  ControllerSpec controller;
  double gain = 1.0;
  double speed_limit = 5.0;
  Quadrature quad;
};

/// One pass of the pipeline: tessellate, moments, Jacobian, controller.
struct Evaluation {
  Tessellation tess;
  MomentSet moments;
  std::optional<CentroidJacobian> jacobian;
  VelocityCommand command;
};

inline Evaluation evaluate(const Dynamics& dyn, const std::vector<Point>& positions, double t,
                           bool want_lambda = false) {
  Evaluation e;
  e.tess = tessellate(positions, dyn.domain);
  const DensitySnapshot phi = dyn.density.at(t);
  e.moments = moments(e.tess, phi, dyn.quad);
  if (dyn.controller.needs_jacobian() || want_lambda) {
    e.jacobian = assemble(e.tess, phi, e.moments, dyn.quad);
    if (want_lambda) {
      try {
        cache_spectral_radius(*e.jacobian);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::EigensolveFailure) throw;
      }
    }
  }
  const ControlState state{e.tess, e.moments, e.jacobian ? &*e.jacobian : nullptr, dyn.gain, t, dyn.speed_limit};
  e.command = compute_command(dyn.controller, state);
  return e;
}

struct StepResult {
  std::vector<Point> positions;
  int clamp_events = 0;
  bool condition_flag = false;  // raised in any stage
};

/// Classical four-stage Runge-Kutta step, full pipeline at every stage.
/// `first` is the evaluation at (positions, t). Stage points and the result are
/// clamped into the domain shrunk by kClampMargin; only result clamps count.
inline StepResult step(const Dynamics& dyn, const std::vector<Point>& positions, double t, double dt,
                       const Evaluation& first) {
  const std::size_t n = positions.size();
  auto offset = [&](const std::vector<Point>& k, double h) {
    std::vector<Point> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = dyn.domain.clamp(positions[i] + h * k[i], kClampMargin);
    return p;
  };
  const auto& k1 = first.command.velocity;
  const Evaluation e2 = evaluate(dyn, offset(k1, 0.5 * dt), t + 0.5 * dt);
  const auto& k2 = e2.command.velocity;
  const Evaluation e3 = evaluate(dyn, offset(k2, 0.5 * dt), t + 0.5 * dt);
  const auto& k3 = e3.command.velocity;
  const Evaluation e4 = evaluate(dyn, offset(k3, dt), t + dt);
  const auto& k4 = e4.command.velocity;

  StepResult out;
  out.positions.resize(n);
  out.condition_flag = first.command.condition_flag || e2.command.condition_flag || e3.command.condition_flag ||
                       e4.command.condition_flag;
  for (std::size_t i = 0; i < n; ++i) {
    const Point next = positions[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    out.positions[i] = dyn.domain.clamp(next, kClampMargin);
    if (out.positions[i] != next) ++out.clamp_events;
  }
  return out;
}

inline StepResult step(const Dynamics& dyn, const std::vector<Point>& positions, double t, double dt) {
  return step(dyn, positions, t, dt, evaluate(dyn, positions, t));
}

struct InitCvtConfig {
  bool enabled = true;
  double tolerance = 1e-6;
  long max_steps = 100000;
};

struct InitCvtResult {
  std::vector<Point> positions;
  double residual = 0.0;  // max_i |p_i - c_i| at the returned positions
  long iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // H at each visited configuration
};

/// Lloyd iteration p <- c(p) under the density frozen at t0. This is the
/// gradient flow of Lloyd's law discretized with kappa * dt = 1. Returns the
/// best configuration found when the budget runs out (converged == false).
inline InitCvtResult init_cvt(const std::vector<Point>& positions, const DensityField& field, double t0,
                              const Domain& domain, const Quadrature& quad, const InitCvtConfig& cfg,
                              bool record_cost = false) {
  const DensitySnapshot phi = field.at(t0);
  InitCvtResult r;
  std::vector<Point> p = positions;
  std::vector<Point> best = p;
  double best_residual = std::numeric_limits<double>::infinity();
  for (long it = 0;; ++it) {
    const Tessellation tess = tessellate(p, domain);
    const MomentSet ms = moments(tess, phi, quad);
    const double residual = ms.max_tracking_error(p);
    if (record_cost) r.cost_history.push_back(ms.locational_cost());
    if (residual < best_residual) {
      best_residual = residual;
      best = p;
    }
    r.iterations = it;
    if (residual < cfg.tolerance) {
      r.converged = true;
      break;
    }
    if (it >= cfg.max_steps) break;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = domain.clamp(ms.centroid[i], kClampMargin);
  }
  r.positions = best;
  r.residual = best_residual;
  return r;
}

/// Uniform random positions inside the domain, each at least `margin` from the
/// boundary and `separation` from the others. Deterministic for a given seed.
inline std::vector<Point> random_positions(const Domain& domain, std::size_t n, std::uint64_t seed,
                                           double margin = 1e-2, double separation = 1e-2) {
  std::mt19937_64 rng(seed);
  Point lo = domain.vertices().front(), hi = lo;
  for (const auto& v : domain.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
  std::vector<Point> p;
  while (p.size() < n) {
    const Point q(ux(rng), uy(rng));
    if (!domain.contains(q, margin)) continue;
    bool ok = true;
    for (const auto& o : p) ok = ok && (o - q).norm() >= separation;
    if (ok) p.push_back(q);
  }
  return p;
}

struct Scenario {
  Domain domain = Domain::box(-3, -3, 3, 3);
  DensityField density = builtin_density("phi2");
  std::size_t robot_count = 5;
  std::vector<Point> initial_positions;  // empty: seeded random
  std::uint64_t seed = 1;
  ControllerSpec controller{ControllerKind::TvdD, 1};
  double gain = 1.0;          // 1/s
  double dt = 0.005;          // s
  double duration = 50.0;     // s, T_f
  double speed_limit = 5.0;   // m/s
  InitCvtConfig init_cvt;
  QuadratureConfig quadrature;
  int sample_every = 1;       // log every k-th step
  bool log_lambda_max = true;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidScenario, m); };
    if (!(dt > 0.0) || !std::isfinite(dt)) bad("dt must be > 0");
    if (!(duration >= 0.0) || !std::isfinite(duration)) bad("duration must be >= 0");
    if (robot_count < 1) bad("robot count must be >= 1");
    if (!initial_positions.empty() && initial_positions.size() != robot_count)
      bad("initial positions must list exactly robot count points");
    if (!(gain > 0.0)) bad("gain must be > 0");
    if (!(speed_limit > 0.0)) bad("v_max must be > 0");
    if (sample_every < 1) bad("sample_every must be >= 1");
    if (!(init_cvt.tolerance > 0.0)) bad("init_cvt tolerance must be > 0");
    if (init_cvt.max_steps < 0) bad("init_cvt max_steps must be >= 0");
    if (controller.kind == ControllerKind::TvdD && controller.hops < 0) bad("hops must be >= 0");
    density.validate();
    (void)Quadrature(quadrature);
  }

  Dynamics dynamics() const { return {domain, density, controller, gain, speed_limit, Quadrature(quadrature)}; }

  std::vector<Point> starting_positions() const {
    return initial_positions.empty() ? random_positions(domain, robot_count, seed) : initial_positions;
  }
};

struct SimTrace {
  std::string controller;
  std::vector<double> times;
  std::vector<std::vector<Point>> positions;
  std::vector<double> cost;             // H(p, t)
  std::vector<double> tracking_error;   // max_i |p_i - c_i|
  std::vector<double> lambda_max;       // NaN when not computed
  std::vector<int> condition_flag;      // 1 if any stage of the following step fell back
  std::vector<int> clamp_events;        // clamps during the step ending at this sample
  double total_cost = 0.0;              // trapezoidal integral of H over every step
  InitCvtResult init;

  std::size_t size() const { return times.size(); }
};

/// Optional init_cvt phase at t = 0, then integration over [0, duration].
inline SimTrace run(const Scenario& sc) {
  sc.validate();
  const Dynamics dyn = sc.dynamics();
  std::vector<Point> p = sc.starting_positions();
  SimTrace trace;
  trace.controller = sc.controller.name();
  if (sc.init_cvt.enabled) {
    trace.init = init_cvt(p, sc.density, 0.0, sc.domain, dyn.quad, sc.init_cvt);
    p = trace.init.positions;
  }

  const long steps = std::lround(sc.duration / sc.dt);
  int pending_clamps = 0;
  int pending_flag = 0;
  double prev_cost = 0.0;
  for (long m = 0; m <= steps; ++m) {
    const double t = static_cast<double>(m) * sc.dt;
    const bool sample = (m % sc.sample_every == 0) || m == steps;
    const Evaluation e = evaluate(dyn, p, t, sample && sc.log_lambda_max);
    const double h = e.moments.locational_cost();
    if (m > 0) trace.total_cost += 0.5 * sc.dt * (prev_cost + h);
    prev_cost = h;

    StepResult next;
    if (m < steps) {
      next = step(dyn, p, t, sc.dt, e);
      pending_flag |= next.condition_flag ? 1 : 0;
    } else {
      pending_flag |= e.command.condition_flag ? 1 : 0;
    }
    if (sample) {
      trace.times.push_back(t);
      trace.positions.push_back(p);
      trace.cost.push_back(h);
      trace.tracking_error.push_back(e.command.tracking_error);
      trace.lambda_max.push_back(e.command.lambda_max.value_or(std::numeric_limits<double>::quiet_NaN()));
      trace.condition_flag.push_back(pending_flag);
      trace.clamp_events.push_back(pending_clamps);
      pending_clamps = 0;
      pending_flag = 0;
    }
    if (m < steps) {
      pending_clamps += next.clamp_events;
      p = std::move(next.positions);
    }
  }
  return trace;
}

namespace detail {

inline void append_number(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "nan";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// Columns: t, p_1x, p_1y, ..., p_nx, p_ny, H, max_tracking_error, lambda_max, condition_flag.
inline std::string trace_csv(const SimTrace& trace) {
  std::string out = "t";
  const std::size_t n = trace.positions.empty() ? 0 : trace.positions.front().size();
  for (std::size_t i = 1; i <= n; ++i) out += ",p_" + std::to_string(i) + "x,p_" + std::to_string(i) + "y";
  out += ",H,max_tracking_error,lambda_max,condition_flag\n";
  for (std::size_t s = 0; s < trace.size(); ++s) {
    detail::append_number(out, trace.times[s]);
    for (const auto& p : trace.positions[s]) {
      out += ',';
      detail::append_number(out, p.x());
      out += ',';
      detail::append_number(out, p.y());
    }
    for (double v : {trace.cost[s], trace.tracking_error[s], trace.lambda_max[s]}) {
      out += ',';
      detail::append_number(out, v);
    }
    out += ',';
    out += std::to_string(trace.condition_flag[s]);
    out += '\n';
  }
  return out;
}

struct TraceSummary {
  double total_cost = 0.0;
  double peak_tracking_error = 0.0;
  double lambda_min = std::numeric_limits<double>::quiet_NaN();
  double lambda_mean = std::numeric_limits<double>::quiet_NaN();
  double lambda_max = std::numeric_limits<double>::quiet_NaN();
  double fraction_lambda_below_one = std::numeric_limits<double>::quiet_NaN();
  int condition_flags = 0;
  int clamp_events = 0;
};

inline TraceSummary summarize(const SimTrace& trace) {
  TraceSummary s;
  s.total_cost = trace.total_cost;
  double sum = 0.0;
  int count = 0, below = 0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    s.peak_tracking_error = std::max(s.peak_tracking_error, trace.tracking_error[k]);
    s.condition_flags += trace.condition_flag[k];
    s.clamp_events += trace.clamp_events[k];
    const double l = trace.lambda_max[k];
    if (std::isnan(l)) continue;
    s.lambda_min = count == 0 ? l : std::min(s.lambda_min, l);
    s.lambda_max = count == 0 ? l : std::max(s.lambda_max, l);
    sum += l;
    ++count;
    if (l < 1.0) ++below;
  }
  if (count > 0) {
    s.lambda_mean = sum / count;
    s.fraction_lambda_below_one = static_cast<double>(below) / count;
  }
  return s;
}

}  // namespace tvdcov
