#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tvdcov/controllers.hpp"
#include "tvdcov/density.hpp"
#include "tvdcov/error.hpp"
#include "tvdcov/geometry.hpp"
#include "tvdcov/sim.hpp"

namespace tvdcov {

inline constexpr int kScenarioSchemaVersion = 1;

/// A scenario file problem, located at a 1-based line and naming the key.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& source, int line, std::string key, const std::string& problem)
      : Error(ErrorCode::InvalidScenario, format(source, line, key, problem)), line_(line), key_(std::move(key)) {}

  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  static std::string format(const std::string& source, int line, const std::string& key, const std::string& problem) {
    std::string out = source;
    if (line > 0) out += ":" + std::to_string(line);
    out += ": ";
    if (!key.empty()) out += "key '" + key + "': ";
    return out + problem;
  }

  int line_;
  std::string key_;
};

namespace detail {

class ScenarioReader {
 public:
  explicit ScenarioReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& key, const std::string& problem) const {
    const YAML::Mark m = at.Mark();
    throw SchemaError(source_, m.is_null() ? 0 : m.line + 1, key, problem);
  }

  [[noreturn]] void fail(const YAML::Mark& m, const std::string& key, const std::string& problem) const {
    throw SchemaError(source_, m.is_null() ? 0 : m.line + 1, key, problem);
  }

  void expect_map(const YAML::Node& n, const std::string& key) const {
    if (!n.IsMap()) fail(n, key, "expected a mapping");
  }

  // Rejects any key of `map` not listed in `allowed`.
  void allow_keys(const YAML::Node& map, const std::string& path, std::initializer_list<std::string_view> allowed) const {
    expect_map(map, path);
    for (auto it = map.begin(); it != map.end(); ++it) {
      const std::string k = it->first.Scalar();
      bool ok = false;
      for (auto a : allowed) ok = ok || a == k;
      if (!ok) fail(it->first, join(path, k), "unknown key");
    }
  }

  double number(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a number");
    double v = 0.0;
    try {
      v = n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, key, "expected a number, got '" + n.Scalar() + "'");
    }
    if (!std::isfinite(v)) fail(n, key, "must be finite");
    return v;
  }

  double positive(const YAML::Node& n, const std::string& key) const {
    const double v = number(n, key);
    if (!(v > 0.0)) fail(n, key, "must be > 0");
    return v;
  }

  long integer(const YAML::Node& n, const std::string& key, long min) const {
    if (!n.IsScalar()) fail(n, key, "expected an integer");
    long v = 0;
    try {
      v = n.as<long>();
    } catch (const YAML::Exception&) {
      fail(n, key, "expected an integer, got '" + n.Scalar() + "'");
    }
    if (v < min) fail(n, key, "must be >= " + std::to_string(min));
    return v;
  }

  bool boolean(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected true or false");
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, key, "expected true or false, got '" + n.Scalar() + "'");
    }
  }

  std::string text(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a string");
    return n.Scalar();
  }

  Point point(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence() || n.size() != 2) fail(n, key, "expected [x, y]");
    return {number(n[0], key), number(n[1], key)};
  }

  std::vector<Point> points(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) fail(n, key, "expected a list of [x, y] points");
    std::vector<Point> out;
    for (std::size_t k = 0; k < n.size(); ++k) out.push_back(point(n[k], index(key, k)));
    return out;
  }

  static std::string join(const std::string& path, const std::string& k) { return path.empty() ? k : path + "." + k; }
  static std::string index(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

 private:
  std::string source_;
};

inline CenterPath read_path(const ScenarioReader& r, const YAML::Node& n, const std::string& key) {
  r.expect_map(n, key);
  if (!n["type"]) r.fail(n, ScenarioReader::join(key, "type"), "missing");
  const std::string type = r.text(n["type"], ScenarioReader::join(key, "type"));
  auto sub = [&](const char* k) { return ScenarioReader::join(key, k); };
  if (type == "fixed") {
    r.allow_keys(n, key, {"type", "center"});
    FixedPath p;
    if (n["center"]) p.center = r.point(n["center"], sub("center"));
    return p;
  }
  if (type == "circular") {
    r.allow_keys(n, key, {"type", "center", "radius", "tau", "phase", "direction"});
    CircularPath p;
    if (n["center"]) p.center = r.point(n["center"], sub("center"));
    if (n["radius"]) p.radius = r.number(n["radius"], sub("radius"));
    if (n["tau"]) p.tau = r.positive(n["tau"], sub("tau"));
    if (n["phase"]) p.phase = r.number(n["phase"], sub("phase"));
    if (n["direction"]) {
      p.direction = r.number(n["direction"], sub("direction"));
      if (p.direction != 1.0 && p.direction != -1.0) r.fail(n["direction"], sub("direction"), "must be 1 or -1");
    }
    return p;
  }
  if (type == "sinusoidal") {
    r.allow_keys(n, key, {"type", "origin", "amplitude", "tau", "phase"});
    SinusoidalPath p;
    if (n["origin"]) p.origin = r.point(n["origin"], sub("origin"));
    if (n["amplitude"]) p.amplitude = r.point(n["amplitude"], sub("amplitude"));
    if (n["tau"]) p.tau = r.positive(n["tau"], sub("tau"));
    if (n["phase"]) p.phase = r.point(n["phase"], sub("phase"));
    return p;
  }
  if (type == "waypoints") {
    r.allow_keys(n, key, {"type", "points"});
    const YAML::Node pts = n["points"];
    if (!pts || !pts.IsSequence() || pts.size() == 0) r.fail(pts ? pts : n, sub("points"), "expected a list of [t, x, y]");
    std::vector<std::pair<double, Point>> samples;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const std::string kk = ScenarioReader::index(sub("points"), k);
      if (!pts[k].IsSequence() || pts[k].size() != 3) r.fail(pts[k], kk, "expected [t, x, y]");
      const double t = r.number(pts[k][0], kk);
      if (!samples.empty() && !(t > samples.back().first)) r.fail(pts[k], kk, "times must increase");
      samples.emplace_back(t, Point(r.number(pts[k][1], kk), r.number(pts[k][2], kk)));
    }
    return WaypointPath::through(samples);
  }
  r.fail(n["type"], sub("type"), "unknown path type '" + type + "' (fixed, circular, sinusoidal, waypoints)");
}

inline GaussianComponent read_component(const ScenarioReader& r, const YAML::Node& n, const std::string& key) {
  r.allow_keys(n, key, {"weight", "scales", "path", "pulse"});
  GaussianComponent c;
  auto sub = [&](const char* k) { return ScenarioReader::join(key, k); };
  if (n["weight"]) c.weight = r.positive(n["weight"], sub("weight"));
  if (n["scales"]) {
    c.inverse_scales = r.point(n["scales"], sub("scales"));
    if (!(c.inverse_scales.x() > 0.0 && c.inverse_scales.y() > 0.0)) r.fail(n["scales"], sub("scales"), "must be > 0");
  }
  if (n["path"]) c.path = read_path(r, n["path"], sub("path"));
  if (const YAML::Node p = n["pulse"]) {
    r.allow_keys(p, sub("pulse"), {"depth", "tau", "phase"});
    const std::string pk = sub("pulse");
    if (p["depth"]) {
      c.pulse.depth = r.number(p["depth"], ScenarioReader::join(pk, "depth"));
      if (!(c.pulse.depth >= 0.0 && c.pulse.depth < 1.0))
        r.fail(p["depth"], ScenarioReader::join(pk, "depth"), "must lie in [0, 1)");
    }
    if (p["tau"]) c.pulse.tau = r.positive(p["tau"], ScenarioReader::join(pk, "tau"));
    if (p["phase"]) c.pulse.phase = r.number(p["phase"], ScenarioReader::join(pk, "phase"));
  }
  return c;
}

inline DensityField read_density(const ScenarioReader& r, const YAML::Node& n) {
  r.allow_keys(n, "density", {"builtin", "floor", "components"});
  double floor = kDefaultDensityFloor;
  if (n["floor"]) floor = r.positive(n["floor"], "density.floor");
  if (n["builtin"] && n["components"]) r.fail(n["components"], "density.components", "give either builtin or components");
  if (n["builtin"]) {
    const std::string name = r.text(n["builtin"], "density.builtin");
    try {
      return builtin_density(name, floor);
    } catch (const Error&) {
      r.fail(n["builtin"], "density.builtin", "unknown builtin density '" + name + "' (phi1..phi5)");
    }
  }
  const YAML::Node cs = n["components"];
  if (!cs) r.fail(n, "density", "needs builtin or components");
  if (!cs.IsSequence()) r.fail(cs, "density.components", "expected a list");
  std::vector<GaussianComponent> comps;
  for (std::size_t k = 0; k < cs.size(); ++k)
    comps.push_back(read_component(r, cs[k], ScenarioReader::index("density.components", k)));
  return DensityField(std::move(comps), floor);
}

}  // namespace detail

/// Parses scenario text. `source` names the input in error messages.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  const detail::ScenarioReader r(source);
  YAML::Node loaded;
  try {
    loaded = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    r.fail(e.mark, "", e.msg);
  }
  const YAML::Node& root = loaded;
  if (!root.IsMap()) r.fail(root, "", "scenario must be a mapping");
  r.allow_keys(root, "",
               {"version", "domain", "density", "robots", "controller", "hops", "gain", "dt", "duration", "v_max",
                "init_cvt", "quadrature", "sample_every", "log_lambda_max"});

  if (!root["version"]) r.fail(root, "version", "missing");
  if (r.integer(root["version"], "version", 0) != kScenarioSchemaVersion)
    r.fail(root["version"], "version", "unsupported schema version (expected " +
                                           std::to_string(kScenarioSchemaVersion) + ")");

  Scenario sc;
  if (const YAML::Node d = root["domain"]) {
    r.allow_keys(d, "domain", {"vertices"});
    if (!d["vertices"]) r.fail(d, "domain.vertices", "missing");
    try {
      sc.domain = Domain(r.points(d["vertices"], "domain.vertices"));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      r.fail(d["vertices"], "domain.vertices", e.what());
    }
  }
  if (root["density"]) sc.density = detail::read_density(r, root["density"]);

  if (const YAML::Node rb = root["robots"]) {
    r.allow_keys(rb, "robots", {"count", "seed", "positions"});
    if (rb["count"]) sc.robot_count = static_cast<std::size_t>(r.integer(rb["count"], "robots.count", 1));
    if (rb["seed"]) sc.seed = static_cast<std::uint64_t>(r.integer(rb["seed"], "robots.seed", 0));
    if (rb["positions"]) {
      sc.initial_positions = r.points(rb["positions"], "robots.positions");
      if (!rb["count"]) sc.robot_count = sc.initial_positions.size();
      if (sc.initial_positions.size() != sc.robot_count)
        r.fail(rb["positions"], "robots.positions", "lists " + std::to_string(sc.initial_positions.size()) +
                                                        " points but robots.count is " +
                                                        std::to_string(sc.robot_count));
      for (std::size_t k = 0; k < sc.initial_positions.size(); ++k)
        if (!sc.domain.contains(sc.initial_positions[k], kClampMargin))
          r.fail(rb["positions"][k], detail::ScenarioReader::index("robots.positions", k),
                 "position lies outside the domain");
    }
  }

  int hops = 1;
  if (root["hops"]) hops = static_cast<int>(r.integer(root["hops"], "hops", 0));
  if (root["controller"]) {
    const std::string name = r.text(root["controller"], "controller");
    const auto spec = ControllerSpec::parse(name, hops);
    if (!spec)
      r.fail(root["controller"], "controller", "unknown controller '" + name + "' (lloyd, cortes, tvd_c, tvd_dk)");
    sc.controller = *spec;
    if (sc.controller.kind != ControllerKind::TvdD) sc.controller.hops = hops;  // for a later --controller tvd_dk
  } else {
    sc.controller = {ControllerKind::TvdD, hops};
  }

  if (root["gain"]) sc.gain = r.positive(root["gain"], "gain");
  if (root["dt"]) sc.dt = r.positive(root["dt"], "dt");
  if (root["duration"]) {
    sc.duration = r.number(root["duration"], "duration");
    if (sc.duration < 0.0) r.fail(root["duration"], "duration", "must be >= 0");
  }
  if (root["v_max"]) sc.speed_limit = r.positive(root["v_max"], "v_max");
  if (root["sample_every"]) sc.sample_every = static_cast<int>(r.integer(root["sample_every"], "sample_every", 1));
  if (root["log_lambda_max"]) sc.log_lambda_max = r.boolean(root["log_lambda_max"], "log_lambda_max");

  if (const YAML::Node ic = root["init_cvt"]) {
    r.allow_keys(ic, "init_cvt", {"enabled", "tolerance", "max_steps"});
    if (ic["enabled"]) sc.init_cvt.enabled = r.boolean(ic["enabled"], "init_cvt.enabled");
    if (ic["tolerance"]) sc.init_cvt.tolerance = r.positive(ic["tolerance"], "init_cvt.tolerance");
    if (ic["max_steps"]) sc.init_cvt.max_steps = r.integer(ic["max_steps"], "init_cvt.max_steps", 0);
  }

  if (const YAML::Node q = root["quadrature"]) {
    r.allow_keys(q, "quadrature", {"triangle_rule_degree", "segment_nodes", "subdivision_depth"});
    if (q["triangle_rule_degree"]) {
      const YAML::Node d = q["triangle_rule_degree"];
      const int deg = static_cast<int>(r.integer(d, "quadrature.triangle_rule_degree", 2));
      if (deg > 8) r.fail(d, "quadrature.triangle_rule_degree", "must be <= 8");
      sc.quadrature.triangle_rule_degree = deg;
    }
    if (q["segment_nodes"])
      sc.quadrature.segment_nodes = static_cast<int>(r.integer(q["segment_nodes"], "quadrature.segment_nodes", 2));
    if (q["subdivision_depth"])
      sc.quadrature.subdivision_depth =
          static_cast<int>(r.integer(q["subdivision_depth"], "quadrature.subdivision_depth", 0));
  }

  try {
    sc.validate();
  } catch (const Error& e) {
    r.fail(root, "", e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path, 0, "", "cannot read file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

/// Command-line values that take precedence over the file.
struct ScenarioOverrides {
  std::optional<std::string> controller;
  std::optional<int> hops;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<double> dt;
};

/// Flags win over file values. --hops applies to the hop-truncated controller
/// whether it came from the file or from --controller.
inline void apply_overrides(Scenario& sc, const ScenarioOverrides& o) {
  auto bad = [](const char* flag, const std::string& m) { throw SchemaError("command line", 0, flag, m); };
  if (o.hops && *o.hops < 0) bad("--hops", "must be >= 0");
  if (o.controller) {
    const auto spec = ControllerSpec::parse(*o.controller, o.hops.value_or(sc.controller.hops));
    if (!spec) bad("--controller", "unknown controller '" + *o.controller + "'");
    sc.controller = *spec;
  } else if (o.hops && sc.controller.kind == ControllerKind::TvdD) {
    sc.controller.hops = *o.hops;
  }
  if (o.seed) sc.seed = *o.seed;
  if (o.duration) {
    if (!(*o.duration >= 0.0) || !std::isfinite(*o.duration)) bad("--duration", "must be >= 0");
    sc.duration = *o.duration;
  }
  if (o.dt) {
    if (!(*o.dt > 0.0) || !std::isfinite(*o.dt)) bad("--dt", "must be > 0");
    sc.dt = *o.dt;
  }
}

}  // namespace tvdcov
