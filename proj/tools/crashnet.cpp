// crashnet: server, device agent and data tooling in one binary.

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "crashnet/agent.hpp"
#include "crashnet/config.hpp"
#include "crashnet/demo.hpp"
#include "crashnet/server.hpp"
#include "crashnet/trace.hpp"

using namespace crashnet;

namespace {

std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (char ch : key) out += ch == '_' ? '-' : ch;
  return out;
}

/// Adds --config plus one flag per config key; only flags the user passed
/// land in `flags`.
struct ConfigFlags {
  std::optional<std::string> config_file;
  std::map<std::string, std::string> values;
  bool allow_external = false;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file");
    for (const auto& key : config_keys()) {
      if (key == "allow_external_telephony") {
        opts[key] = app->add_flag("--allow-external-telephony", allow_external,
                                  "Permit real calls through the external gateway");
        continue;
      }
      std::string names = flag_name(key);
      if (key == "db_path") names += ",--db";
      opts[key] = app->add_option(names, values[key], "Config: " + key);
    }
  }

  Config resolve() const {
    std::map<std::string, std::string> passed;
    for (const auto& [key, opt] : opts) {
      if (opt->count() == 0) continue;
      passed[key] = key == "allow_external_telephony" ? (allow_external ? "true" : "false")
                                                      : values.at(key);
    }
    return resolve_config(config_file, process_env(), passed);
  }
};

int run_serve(const ConfigFlags& flags) {
  const Config cfg = flags.resolve();
  validate(cfg);

  // Block the shutdown signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  std::mutex log_mu;
  ServerStack server(cfg, nullptr, nullptr, [&log_mu](const std::string& line) {
    std::lock_guard lock(log_mu);
    std::cerr << line << '\n';
  });
  try {
    server.start();
  } catch (const net::NetError& e) {
    std::cerr << "crashnet serve: " << e.what() << '\n';
    return 2;
  }
  std::cerr << "crashnet serve: wire " << cfg.host << ":" << server.wire_port() << ", api "
            << cfg.host << ":" << server.api_port() << ", db " << cfg.db_path << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "crashnet serve: shutting down" << std::endl;
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crashnet: crash and pothole reporting"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the ingestion server and query API");
  ConfigFlags serve_flags;
  serve_flags.attach(serve);

  // agent
  auto* agent = app.add_subcommand("agent", "Device agent");
  agent->require_subcommand(1);

  std::string trace_path, driver_id, server_addr, blackbox_dir = "blackbox";
  double time_scale = 0.0;
  std::int64_t retry_interval_ms = 1000;
  int final_attempts = 3;
  auto* replay = agent->add_subcommand("replay", "Replay a trace through detection and delivery");
  replay->add_option("--trace", trace_path, "Trace file")->required();
  replay->add_option("--driver", driver_id, "Driver id stamped on every report")->required();
  replay->add_option("--server", server_addr, "Ingestion server host:port")->required();
  replay->add_option("--time-scale", time_scale,
                     "0 replays as fast as possible; N runs N times real time")
      ->check(CLI::NonNegativeNumber);
  replay->add_option("--blackbox", blackbox_dir, "Black-box directory");
  replay->add_option("--retry-interval-ms", retry_interval_ms, "Trace time between redeliveries");
  replay->add_option("--final-attempts", final_attempts, "Delivery rounds after the trace ends");

  std::string spec_path, out_path;
  std::optional<std::uint64_t> seed;
  auto* gen = agent->add_subcommand("gen-trace", "Synthesize a trace from a scenario file");
  gen->add_option("--spec", spec_path, "Scenario JSON")->required();
  gen->add_option("--out", out_path, "Output trace file")->required();
  gen->add_option("--seed", seed, "Overrides the scenario seed");

  auto* flush = agent->add_subcommand("flush", "Re-send unacknowledged black-box entries");
  flush->add_option("--server", server_addr, "Ingestion server host:port")->required();
  flush->add_option("--blackbox", blackbox_dir, "Black-box directory");

  // drivers
  auto* drivers = app.add_subcommand("drivers", "Driver registry");
  drivers->require_subcommand(1);
  std::string csv_path;
  auto* import = drivers->add_subcommand("import", "Bulk upsert drivers from CSV");
  import->add_option("csv", csv_path, "CSV with header driver_id,name,car,plate,contact_name,contact_phone")
      ->required();
  ConfigFlags import_flags;
  import_flags.attach(import);

  // demo
  std::uint64_t demo_seed = 7;
  bool no_crash = false;
  std::string workdir;
  auto* demo = app.add_subcommand("demo", "Scenario with two potholes and a crash, end to end");
  demo->add_option("--seed", demo_seed, "Scenario seed");
  demo->add_flag("--no-crash", no_crash, "Leave out the crash");
  demo->add_option("--workdir", workdir, "Keep the database and black box here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return run_serve(serve_flags);

    if (*replay) {
      const auto trace = load_trace(trace_path);
      BlackBox box(blackbox_dir);
      TcpLink link(net::parse_endpoint(server_addr));
      AgentOptions opts;
      opts.time_scale = time_scale;
      opts.retry_interval_ms = retry_interval_ms;
      opts.final_attempts = final_attempts;
      Agent a(box, link, opts);
      const auto cfg = trace.apply_overrides(DetectionConfig{});
      const auto r = a.replay(trace, driver_id, cfg);
      std::cout << "detected " << r.detected << " acked " << r.acked << " retransmissions "
                << r.retransmissions << std::endl;
      return r.acked == r.detected ? 0 : 1;
    }

    if (*gen) {
      auto spec = load_scenario(spec_path);
      if (seed) spec.seed = *seed;
      const auto trace = generate_trace(spec);
      std::ofstream out(out_path);
      if (!out) throw std::runtime_error("cannot write " + out_path);
      write_trace(trace, out);
      std::cout << "wrote " << trace.rows.size() << " rows to " << out_path << std::endl;
      return 0;
    }

    if (*flush) {
      BlackBox box(blackbox_dir);
      TcpLink link(net::parse_endpoint(server_addr));
      Agent a(box, link);
      const auto n = a.flush_unacked();
      const auto left = box.size() - box.acked_through();
      std::cout << "flushed " << n << " unacked " << left << std::endl;
      return left == 0 ? 0 : 1;
    }

    if (*import) {
      const Config cfg = import_flags.resolve();
      std::ifstream in(csv_path);
      if (!in) throw std::runtime_error("cannot read " + csv_path);
      EventStore store(cfg.db_path);
      const auto r = import_drivers_csv(in, store, std::cerr);
      std::cout << "imported " << r.imported << std::endl;
      if (r.skipped > 0) std::cerr << "skipped " << r.skipped << std::endl;
      return r.imported == 0 && r.skipped > 0 ? 1 : 0;
    }

    if (*demo) {
      DemoOptions opts;
      opts.seed = demo_seed;
      opts.crash = !no_crash;
      opts.workdir = workdir;
      const auto r = run_demo(opts);
      print_demo(r, std::cout);
      return r.run.acked == r.run.detected ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "crashnet: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
