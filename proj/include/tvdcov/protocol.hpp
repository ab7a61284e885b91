#pragma once

#include <json.hpp>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tvdcov/controllers.hpp"
#include "tvdcov/density.hpp"
#include "tvdcov/error.hpp"
#include "tvdcov/sim.hpp"

namespace tvdcov::protocol {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// A client message that cannot be applied. Reported back as an `error`
/// message; the simulation is left untouched.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AddComponent {
  GaussianComponent component;
};

// Re-aims a component's center. Weight and scales, when given, change at the
// step boundary where the command lands.
struct MoveComponent {
  std::size_t index = 0;
  Point target = Point::Zero();
  double duration = 1.0;  // s until the center arrives
  std::optional<double> weight;
  std::optional<Point> scales;
};

struct RemoveComponent {
  std::size_t index = 0;
};

struct SetController {
  ControllerSpec spec;
};

struct SetGain {
  double gain = 1.0;
};

struct Pause {};
struct Resume {};
struct Reset {};

using Command = std::variant<AddComponent, MoveComponent, RemoveComponent, SetController, SetGain, Pause, Resume, Reset>;

inline const char* command_name(const Command& c) {
  static constexpr const char* names[] = {"add_component", "move_component", "remove_component", "set_controller",
                                          "set_gain",      "pause",          "resume",           "reset"};
  return names[c.index()];
}

namespace detail {

inline double number(const json& msg, const char* key) {
  if (!msg.contains(key)) throw ProtocolError(std::string("missing field '") + key + "'");
  const json& v = msg.at(key);
  if (!v.is_number()) throw ProtocolError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ProtocolError(std::string("field '") + key + "' must be finite");
  return d;
}

inline double positive(const json& msg, const char* key) {
  const double d = number(msg, key);
  if (!(d > 0.0)) throw ProtocolError(std::string("field '") + key + "' must be > 0");
  return d;
}

inline Point point(const json& msg, const char* key) {
  if (!msg.contains(key)) throw ProtocolError(std::string("missing field '") + key + "'");
  const json& v = msg.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ProtocolError(std::string("field '") + key + "' must be [x, y]");
  const Point p(v[0].get<double>(), v[1].get<double>());
  if (!p.allFinite()) throw ProtocolError(std::string("field '") + key + "' must be finite");
  return p;
}

inline Point scales(const json& msg) {
  const Point s = point(msg, "scales");
  if (!(s.x() > 0.0 && s.y() > 0.0)) throw ProtocolError("field 'scales' must be > 0");
  return s;
}

inline std::size_t index(const json& msg) {
  if (!msg.contains("index") || !msg.at("index").is_number_integer() || msg.at("index").get<long long>() < 0)
    throw ProtocolError("field 'index' must be a non-negative integer");
  return static_cast<std::size_t>(msg.at("index").get<long long>());
}

inline json point_json(const Point& p) { return json::array({p.x(), p.y()}); }

}  // namespace detail

/// Decodes a `command` message. Unknown commands and malformed fields throw.
inline Command parse_command(const json& msg) {
  if (!msg.is_object()) throw ProtocolError("message must be a JSON object");
  if (!msg.contains("type") || msg.at("type") != "command") throw ProtocolError("expected type 'command'");
  if (msg.contains("schema_version") && msg.at("schema_version") != kSchemaVersion)
    throw ProtocolError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  if (!msg.contains("command") || !msg.at("command").is_string()) throw ProtocolError("missing field 'command'");
  const std::string name = msg.at("command").get<std::string>();

  if (name == "add_component") {
    AddComponent c;
    c.component.path = FixedPath{detail::point(msg, "center")};
    if (msg.contains("weight")) c.component.weight = detail::positive(msg, "weight");
    if (msg.contains("scales")) c.component.inverse_scales = detail::scales(msg);
    return c;
  }
  if (name == "move_component") {
    MoveComponent c;
    c.index = detail::index(msg);
    c.target = detail::point(msg, "target");
    if (msg.contains("duration")) c.duration = detail::positive(msg, "duration");
    if (msg.contains("weight")) c.weight = detail::positive(msg, "weight");
    if (msg.contains("scales")) c.scales = detail::scales(msg);
    return c;
  }
  if (name == "remove_component") return RemoveComponent{detail::index(msg)};
  if (name == "set_controller") {
    if (!msg.contains("controller") || !msg.at("controller").is_string())
      throw ProtocolError("missing field 'controller'");
    int hops = 1;
    if (msg.contains("hops")) {
      if (!msg.at("hops").is_number_integer() || msg.at("hops").get<int>() < 0)
        throw ProtocolError("field 'hops' must be a non-negative integer");
      hops = msg.at("hops").get<int>();
    }
    const std::string s = msg.at("controller").get<std::string>();
    const auto spec = ControllerSpec::parse(s, hops);
    if (!spec) throw ProtocolError("unknown controller '" + s + "'");
    return SetController{*spec};
  }
  if (name == "set_gain") return SetGain{detail::positive(msg, "gain")};
  if (name == "pause") return Pause{};
  if (name == "resume") return Resume{};
  if (name == "reset") return Reset{};
  throw ProtocolError("unknown command '" + name + "'");
}

/// The simulation a service owns. Not thread-safe: one loop drives it and
/// applies commands between steps.
class LiveSimulation {
 public:
  explicit LiveSimulation(const Scenario& sc) : base_(sc), dyn_(sc.dynamics()) {
    sc.validate();
    initial_ = sc.starting_positions();
    if (sc.init_cvt.enabled) initial_ = init_cvt(initial_, sc.density, 0.0, sc.domain, dyn_.quad, sc.init_cvt).positions;
    restart();
  }

  double t() const { return static_cast<double>(steps_) * base_.dt; }
  double dt() const { return base_.dt; }
  bool paused() const { return paused_; }
  void set_paused(bool p) { paused_ = p; }
  const std::vector<Point>& positions() const { return positions_; }
  const std::vector<double>& headings() const { return headings_; }
  const DensityField& density() const { return dyn_.density; }
  const Dynamics& dynamics() const { return dyn_; }
  const Scenario& scenario() const { return base_; }

  void apply(const Command& cmd) {
    std::visit([this](const auto& c) { apply_one(c); }, cmd);
  }

  // One integrator step. Does nothing while paused.
  void advance() {
    if (paused_) return;
    const Evaluation e = evaluate(dyn_, positions_, t());
    StepResult r = step(dyn_, positions_, t(), base_.dt, e);
    for (std::size_t i = 0; i < positions_.size(); ++i)
      headings_[i] += base_.dt * unicycle_map(e.command.velocity[i], headings_[i]).omega;
    positions_ = std::move(r.positions);
    ++steps_;
  }

  json frame() const {
    const Evaluation e = evaluate(dyn_, positions_, t(), /*want_lambda=*/true);
    json robots = json::array();
    json cells = json::array();
    json centroids = json::array();
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      robots.push_back({{"id", i},
                        {"position", detail::point_json(positions_[i])},
                        {"heading", headings_[i]},
                        {"velocity", detail::point_json(e.command.velocity[i])}});
      json cell = json::array();
      for (const auto& v : e.tess.cells[i]) cell.push_back(detail::point_json(v));
      cells.push_back(std::move(cell));
      centroids.push_back(detail::point_json(e.moments.centroid[i]));
    }
    json domain = json::array();
    for (const auto& v : base_.domain.vertices()) domain.push_back(detail::point_json(v));
    const double lambda = e.jacobian && e.jacobian->cached_spectral_radius() ? *e.jacobian->cached_spectral_radius()
                                                                               : std::nan("");
    return {{"type", "frame"},
            {"schema_version", kSchemaVersion},
            {"t", t()},
            {"paused", paused_},
            {"controller", dyn_.controller.name()},
            {"gain", dyn_.gain},
            {"domain", std::move(domain)},
            {"robots", std::move(robots)},
            {"cells", std::move(cells)},
            {"centroids", std::move(centroids)},
            {"H", e.moments.locational_cost()},
            {"max_tracking_error", e.command.tracking_error},
            {"lambda_max", std::isnan(lambda) ? json(nullptr) : json(lambda)},
            {"condition_flag", e.command.condition_flag},
            {"density", density_json()}};
  }

  json density_json() const {
    json comps = json::array();
    const DensitySnapshot snap = dyn_.density.at(t());
    const auto& cs = dyn_.density.components();
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const auto& term = snap.terms[k];
      comps.push_back({{"index", k},
                       {"weight", term.weight},
                       {"center", detail::point_json(term.center)},
                       {"velocity", detail::point_json(term.center_velocity)},
                       {"scales", detail::point_json(term.inverse_scales)},
                       {"path_type", path_type_name(cs[k].path)}});
    }
    return {{"floor", dyn_.density.floor()}, {"components", std::move(comps)}};
  }

 private:
  void restart() {
    positions_ = initial_;
    headings_.assign(positions_.size(), 0.0);
    steps_ = 0;
    dyn_.density = base_.density;
    dyn_.controller = base_.controller;
    dyn_.gain = base_.gain;
  }

  GaussianComponent& component(std::size_t index) {
    auto& cs = dyn_.density.components();
    if (index >= cs.size())
      throw ProtocolError("no density component " + std::to_string(index) + " (have " + std::to_string(cs.size()) + ")");
    return cs[index];
  }

  // Edits build a new field and swap it in only once it validates.
  void apply_one(const AddComponent& c) {
    DensityField next = dyn_.density;
    next.components().push_back(c.component);
    next.validate();
    dyn_.density = std::move(next);
  }
  void apply_one(const MoveComponent& c) {
    component(c.index);
    if (!base_.domain.contains(c.target)) throw ProtocolError("target lies outside the domain");
    DensityField next = dyn_.density;
    GaussianComponent& g = next.components()[c.index];
    retarget_component(g, t(), c.target, c.duration);
    if (c.weight) g.weight = *c.weight;
    if (c.scales) g.inverse_scales = *c.scales;
    next.validate();
    dyn_.density = std::move(next);
  }
  void apply_one(const RemoveComponent& c) {
    component(c.index);
    auto& cs = dyn_.density.components();
    cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(c.index));
  }
  void apply_one(const SetController& c) { dyn_.controller = c.spec; }
  void apply_one(const SetGain& c) { dyn_.gain = c.gain; }
  void apply_one(const Pause&) { paused_ = true; }
  void apply_one(const Resume&) { paused_ = false; }
  void apply_one(const Reset&) { restart(); }

  Scenario base_;
  Dynamics dyn_;
  std::vector<Point> initial_;
  std::vector<Point> positions_;
  std::vector<double> headings_;
  long steps_ = 0;
  bool paused_ = false;
};

inline json hello_message(const LiveSimulation& sim, double frame_rate, double time_scale) {
  return {{"type", "hello"},
          {"schema_version", kSchemaVersion},
          {"server", "tvdcov"},
          {"robots", sim.positions().size()},
          {"dt", sim.dt()},
          {"frame_rate", frame_rate},
          {"time_scale", time_scale}};
}

inline json error_message(const std::string& message, const std::string& source = "command") {
  return {{"type", "error"}, {"schema_version", kSchemaVersion}, {"source", source}, {"message", message}};
}

/// Parses and applies one client text message. Returns an error message to
/// send back, or nothing on success.
inline std::optional<json> handle_text(LiveSimulation& sim, const std::string& text) {
  try {
    const json msg = json::parse(text);
    const Command cmd = parse_command(msg);
    sim.apply(cmd);
    return std::nullopt;
  } catch (const json::exception& e) {
    return error_message(std::string("malformed JSON: ") + e.what());
  } catch (const ProtocolError& e) {
    return error_message(e.what());
  } catch (const Error& e) {
    return error_message(e.what());
  }
}

}  // namespace tvdcov::protocol
