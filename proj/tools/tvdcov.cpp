// Command-line front end: run a scenario, compare controllers, or serve a live
// simulation over WebSocket.
//
// Exit status: 0 success, 2 scenario or flag error, 3 simulation failure.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tvdcov/scenario.hpp"
#include "tvdcov/service.hpp"
#include "tvdcov/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitSimulation = 3;

struct Flags {
  std::string scenario;
  std::string out;
  std::vector<std::string> controllers;
  std::optional<int> hops;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<double> dt;
  int na_threshold = 50;
  std::string listen = "127.0.0.1:8765";
  double time_scale = 1.0;
  double frame_rate = 30.0;
};

tvdcov::Scenario load(const Flags& f, bool with_controller) {
  tvdcov::Scenario sc = tvdcov::load_scenario(f.scenario);
  tvdcov::ScenarioOverrides o;
  if (with_controller && !f.controllers.empty()) o.controller = f.controllers.front();
  o.hops = f.hops;
  o.seed = f.seed;
  o.duration = f.duration;
  o.dt = f.dt;
  tvdcov::apply_overrides(sc, o);
  return sc;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::string summary_text(const tvdcov::SimTrace& trace) {
  const tvdcov::TraceSummary s = tvdcov::summarize(trace);
  std::ostringstream o;
  o << std::setprecision(10);
  o << "controller: " << trace.controller << "\n"
    << "samples: " << trace.size() << "\n"
    << "total_cost: " << s.total_cost << "\n"
    << "peak_tracking_error: " << s.peak_tracking_error << "\n"
    << "lambda_max_min: " << s.lambda_min << "\n"
    << "lambda_max_mean: " << s.lambda_mean << "\n"
    << "lambda_max_max: " << s.lambda_max << "\n"
    << "lambda_below_one_fraction: " << s.fraction_lambda_below_one << "\n"
    << "condition_flags: " << s.condition_flags << "\n"
    << "clamp_events: " << s.clamp_events << "\n"
    << "init_cvt_iterations: " << trace.init.iterations << "\n"
    << "init_cvt_residual: " << trace.init.residual << "\n";
  return o.str();
}

int cmd_run(const Flags& f) {
  const tvdcov::Scenario sc = load(f, true);
  const tvdcov::SimTrace trace = tvdcov::run(sc);
  if (sc.init_cvt.enabled && !trace.init.converged)
    std::cerr << "warning: init_cvt stopped at residual " << trace.init.residual << "\n";
  write_file(f.out, tvdcov::trace_csv(trace));
  const std::string summary = summary_text(trace);
  write_file(f.out + ".summary.txt", summary);
  std::cout << summary;
  return kExitOk;
}

// "tvd_dk:A-B" expands to tvd_dA ... tvd_dB.
std::vector<tvdcov::ControllerSpec> expand(const std::vector<std::string>& names, int default_hops) {
  std::vector<tvdcov::ControllerSpec> out;
  for (const auto& name : names) {
    const auto dash = name.find('-');
    if (name.starts_with("tvd_dk:") && dash != std::string::npos) {
      int a = -1, b = -1;
      try {
        a = std::stoi(name.substr(7, dash - 7));
        b = std::stoi(name.substr(dash + 1));
      } catch (const std::exception&) {
      }
      if (a < 0 || b < a) throw tvdcov::SchemaError("command line", 0, "--controller", "bad hop range '" + name + "'");
      for (int k = a; k <= b; ++k) out.push_back({tvdcov::ControllerKind::TvdD, k});
      continue;
    }
    const auto spec = tvdcov::ControllerSpec::parse(name, default_hops);
    if (!spec) throw tvdcov::SchemaError("command line", 0, "--controller", "unknown controller '" + name + "'");
    out.push_back(*spec);
  }
  return out;
}

int cmd_compare(const Flags& f) {
  tvdcov::Scenario sc = load(f, false);
  const auto specs = expand(f.controllers, f.hops.value_or(sc.controller.hops));
  if (specs.empty()) throw tvdcov::SchemaError("command line", 0, "--controller", "empty controller list");

  // Every controller starts from the same configuration.
  sc.validate();
  std::vector<tvdcov::Point> start = sc.starting_positions();
  if (sc.init_cvt.enabled) {
    const auto init = tvdcov::init_cvt(start, sc.density, 0.0, sc.domain, tvdcov::Quadrature(sc.quadrature), sc.init_cvt);
    if (!init.converged) std::cerr << "warning: init_cvt stopped at residual " << init.residual << "\n";
    start = init.positions;
  }
  sc.initial_positions = start;
  sc.robot_count = start.size();
  sc.init_cvt.enabled = false;

  std::ostringstream csv, table;
  csv << std::setprecision(10);
  csv << "controller,total_cost,peak_tracking_error,lambda_max_mean,condition_flags,clamp_events,status\n";
  table << std::left << std::setw(10) << "controller" << std::right << std::setw(14) << "total cost" << std::setw(14)
        << "peak |p-c|" << std::setw(9) << "flags" << std::setw(9) << "clamps"
        << "  note\n";
  for (const auto& spec : specs) {
    tvdcov::Scenario run_sc = sc;
    run_sc.controller = spec;
    const tvdcov::TraceSummary s = tvdcov::summarize(tvdcov::run(run_sc));
    const bool na = s.clamp_events > f.na_threshold;
    const char* status = na ? "N/A-equivalent" : "ok";
    csv << spec.name() << ',' << s.total_cost << ',' << s.peak_tracking_error << ',' << s.lambda_mean << ','
        << s.condition_flags << ',' << s.clamp_events << ',' << status << '\n';
    table << std::left << std::setw(10) << spec.name() << std::right << std::fixed << std::setprecision(3)
          << std::setw(14) << s.total_cost << std::setprecision(5) << std::setw(14) << s.peak_tracking_error
          << std::setw(9) << s.condition_flags << std::setw(9) << s.clamp_events << "  " << (na ? status : "")
          << '\n';
    table.unsetf(std::ios::fixed);
  }
  write_file(f.out, csv.str());
  write_file(f.out + ".txt", table.str());
  std::cout << table.str();
  return kExitOk;
}

tvdcov::service::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Flags& f) {
  const tvdcov::Scenario sc = load(f, true);
  tvdcov::service::ServiceOptions opt;
  try {
    std::tie(opt.address, opt.port) = tvdcov::service::parse_endpoint(f.listen);
  } catch (const tvdcov::Error& e) {
    throw tvdcov::SchemaError("command line", 0, "--listen", e.what());
  }
  opt.time_scale = f.time_scale;
  opt.frame_rate = f.frame_rate;
  tvdcov::service::Server server(sc, opt);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving on ws://" << opt.address << ":" << server.port() << "/" << std::endl;
  server.run();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage control with time-varying densities"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("--scenario", f.scenario, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--hops", f.hops, "Hop count for tvd_dk");
    sub->add_option("--seed", f.seed, "Seed for random initial positions");
    sub->add_option("--duration", f.duration, "Simulated time T_f [s]");
    sub->add_option("--dt", f.dt, "Integrator step [s]");
  };

  CLI::App* run = app.add_subcommand("run", "Simulate one scenario and write its trace");
  common(run);
  run->add_option("--out", f.out, "Trace CSV path; the summary goes to <out>.summary.txt")->required();
  run->add_option("--controller", f.controllers, "lloyd, cortes, tvd_c or tvd_dk")->expected(1);

  CLI::App* compare = app.add_subcommand("compare", "Run several controllers from the same start");
  common(compare);
  compare->add_option("--out", f.out, "Table CSV path; a text table goes to <out>.txt")->required();
  compare->add_option("--controller", f.controllers, "Controllers, comma separated or repeated; tvd_dk:A-B for a hop range")
      ->delimiter(',');
  compare->add_option("--na-threshold", f.na_threshold, "Clamp events above which a run is marked N/A-equivalent");

  CLI::App* serve = app.add_subcommand("serve", "Stream a live simulation over WebSocket");
  common(serve);
  serve->add_option("--listen", f.listen, "host:port to listen on");
  serve->add_option("--controller", f.controllers, "Initial controller")->expected(1);
  serve->add_option("--time-scale", f.time_scale, "Simulated seconds per wall second");
  serve->add_option("--frame-rate", f.frame_rate, "Frames per second");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSchema;
  }

  try {
    if (*run) return cmd_run(f);
    if (*compare) return cmd_compare(f);
    if (*serve) return cmd_serve(f);
  } catch (const tvdcov::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return kExitSimulation;
  }
  return kExitOk;
}
