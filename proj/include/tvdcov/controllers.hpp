#pragma once

#include <Eigen/Core>

#include <charconv>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tvdcov/error.hpp"
#include "tvdcov/geometry.hpp"
#include "tvdcov/jacobian.hpp"
#include "tvdcov/moments.hpp"

namespace tvdcov {

enum class ControllerKind { Lloyd, Cortes, TvdC, TvdD };

struct ControllerSpec {
  ControllerKind kind = ControllerKind::TvdD;
  int hops = 1;  // TvdD only

  bool needs_jacobian() const { return kind == ControllerKind::TvdC || kind == ControllerKind::TvdD; }

  std::string name() const {
    switch (kind) {
      case ControllerKind::Lloyd: return "lloyd";
      case ControllerKind::Cortes: return "cortes";
      case ControllerKind::TvdC: return "tvd_c";
      case ControllerKind::TvdD: return "tvd_d" + std::to_string(hops);
    }
    return "?";
  }

  // Accepts lloyd, cortes, tvd_c, tvd_dk (hops from `default_hops`), tvd_dk:K and tvd_dK.
  static std::optional<ControllerSpec> parse(std::string_view s, int default_hops = 1) {
    if (s == "lloyd") return ControllerSpec{ControllerKind::Lloyd, 0};
    if (s == "cortes") return ControllerSpec{ControllerKind::Cortes, 0};
    if (s == "tvd_c") return ControllerSpec{ControllerKind::TvdC, 0};
    if (s == "tvd_dk") return ControllerSpec{ControllerKind::TvdD, default_hops};
    std::string_view digits;
    if (s.starts_with("tvd_dk:"))
      digits = s.substr(7);
    else if (s.starts_with("tvd_d"))
      digits = s.substr(5);
    else
      return std::nullopt;
    int k = -1;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || k < 0) return std::nullopt;
    return ControllerSpec{ControllerKind::TvdD, k};
  }
};

/// Everything a controller reads. Moments and Jacobian must come from the same
/// tessellation and time.
struct ControlState {
  const Tessellation& tess;
  const MomentSet& moments;
  const CentroidJacobian* jacobian = nullptr;
  double gain = 1.0;  // proportional gain kappa
  double t = 0.0;
  double speed_limit = std::numeric_limits<double>::infinity();
};

struct VelocityCommand {
  std::vector<Point> velocity;
  double tracking_error = 0.0;  // max_i |p_i - c_i|
  std::optional<double> lambda_max;
  bool condition_flag = false;  // exact solve failed; fell back to one hop
  std::optional<double> condition;
  int capped = 0;  // robots whose speed was limited
};

namespace detail {

inline Eigen::VectorXd stack(const std::vector<Point>& v) {
  Eigen::VectorXd out(2 * static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out.segment<2>(2 * static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

inline std::vector<Point> unstack(const Eigen::VectorXd& v) {
  std::vector<Point> out(static_cast<std::size_t>(v.size() / 2));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.segment<2>(2 * static_cast<Eigen::Index>(i));
  return out;
}

// -kappa (p - c) + dc/dt, per robot.
inline Eigen::VectorXd drive(const ControlState& s) {
  const std::size_t n = s.tess.size();
  Eigen::VectorXd v(2 * static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    v.segment<2>(2 * static_cast<Eigen::Index>(i)) =
        -s.gain * (s.tess.positions[i] - s.moments.centroid[i]) + s.moments.centroid_rate[i];
  return v;
}

inline VelocityCommand finish(const ControlState& s, std::vector<Point> velocity) {
  VelocityCommand cmd;
  cmd.velocity = std::move(velocity);
  cmd.tracking_error = s.moments.max_tracking_error(s.tess.positions);
  if (s.jacobian && s.jacobian->cached_spectral_radius()) cmd.lambda_max = *s.jacobian->cached_spectral_radius();
  for (auto& v : cmd.velocity) {
    const double speed = v.norm();
    if (speed > s.speed_limit) {
      v *= s.speed_limit / speed;
      ++cmd.capped;
    }
  }
  return cmd;
}

inline const CentroidJacobian& require_jacobian(const ControlState& s) {
  if (!s.jacobian) throw Error(ErrorCode::InvalidScenario, "controller needs an assembled Jacobian");
  return *s.jacobian;
}

}  // namespace detail

/// pdot_i = -kappa (p_i - c_i)
inline VelocityCommand lloyd(const ControlState& s) {
  std::vector<Point> v(s.tess.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -s.gain * (s.tess.positions[i] - s.moments.centroid[i]);
  return detail::finish(s, std::move(v));
}

/// pdot_i = c_{i,t} - (kappa + m_{i,t} / m_i)(p_i - c_i)
inline VelocityCommand cortes(const ControlState& s) {
  const auto& ms = s.moments;
  std::vector<Point> v(s.tess.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = ms.centroid_rate[i] - (s.gain + ms.mass_rate[i] / ms.mass[i]) * (s.tess.positions[i] - ms.centroid[i]);
  return detail::finish(s, std::move(v));
}

/// pdot = sum_{l=0}^{hops} (dc/dp)^l (-kappa (p - c) + dc/dt)
inline VelocityCommand tvd_dk(const ControlState& s, int hops) {
  const auto& jac = detail::require_jacobian(s);
  return detail::finish(s, detail::unstack(neumann_apply(jac, hops, detail::drive(s))));
}

/// pdot = (I - dc/dp)^{-1} (-kappa (p - c) + dc/dt). A numerically singular
/// system falls back to the one-hop truncation and raises the condition flag.
inline VelocityCommand tvd_c(const ControlState& s) {
  const auto& jac = detail::require_jacobian(s);
  const Eigen::VectorXd rhs = detail::drive(s);
  try {
    const LinearSolve sol = solve_exact(jac, rhs);
    VelocityCommand cmd = detail::finish(s, detail::unstack(sol.x));
    cmd.condition = sol.condition;
    return cmd;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularSystem) throw;
    VelocityCommand cmd = detail::finish(s, detail::unstack(neumann_apply(jac, 1, rhs)));
    cmd.condition_flag = true;
    return cmd;
  }
}

inline VelocityCommand compute_command(const ControllerSpec& spec, const ControlState& s) {
  switch (spec.kind) {
    case ControllerKind::Lloyd: return lloyd(s);
    case ControllerKind::Cortes: return cortes(s);
    case ControllerKind::TvdC: return tvd_c(s);
    case ControllerKind::TvdD: return tvd_dk(s, spec.hops);
  }
  return lloyd(s);
}

}  // namespace tvdcov
