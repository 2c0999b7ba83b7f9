#include "crashnet/demo.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <ostream>
#include <unistd.h>

#include "crashnet/server.hpp"
#include "crashnet/util.hpp"

namespace crashnet {

namespace {

constexpr double kRouteLat0 = 40.0000;
constexpr double kRouteLon = -83.0000;
constexpr TimestampMs kDemoStart = 1'700'000'000'000;

std::filesystem::path fresh_dir() {
  const auto base = std::filesystem::temp_directory_path();
  for (int i = 0;; ++i) {
    auto p = base / ("crashnet-demo-" + std::to_string(::getpid()) + "-" + std::to_string(i));
    if (std::filesystem::create_directory(p)) return p;
  }
}

}  // namespace

ScenarioSpec demo_scenario(std::uint64_t seed, bool crash) {
  ScenarioSpec s;
  s.device_id = "demo-vehicle";
  s.route = {{kRouteLat0, kRouteLon}, {kRouteLat0 + 0.0100, kRouteLon}};
  s.cruise_speed_kmh = 50.0;
  s.sample_rate_hz = 100.0;
  s.fix_rate_hz = 1.0;
  s.duration_ms = 40000;
  s.start_t = kDemoStart;
  s.noise_g = 0.3;
  s.injections = {{8000, InjectionKind::pothole, 5.5, 60},
                  {18000, InjectionKind::pothole, -6.0, 80}};
  if (crash) s.injections.push_back({28000, InjectionKind::crash_x, -22.0, 120});
  s.seed = seed;
  return s;
}

DriverRecord demo_driver() {
  return {kDemoDriverId, "Dana Whitfield", "2019 Honda Civic", "CRSH-042",
          "Sam Whitfield", "+15555550123"};
}

std::vector<GazetteerEntry> demo_gazetteer() {
  static const char* streets[] = {"Elm St",     "Oak Ave",   "Maple Rd",  "Cedar Ln",
                                  "Birch Blvd", "Walnut St", "Spruce Ct", "Aspen Way",
                                  "Willow Dr",  "Hickory Pl", "Poplar St"};
  std::vector<GazetteerEntry> out;
  for (int i = 0; i < 11; ++i)
    out.push_back({std::string("High St & ") + streets[i] + ", Columbus, OH",
                   kRouteLat0 + 0.001 * i, kRouteLon});
  return out;
}

DemoResult run_demo(const DemoOptions& opts) {
  const bool temp = opts.workdir.empty();
  const auto dir = temp ? fresh_dir() : opts.workdir;
  std::filesystem::create_directories(dir);

  DemoResult result;
  {
    Config cfg;
    cfg.host = "127.0.0.1";
    cfg.wire_port = 0;
    cfg.api_port = 0;
    cfg.db_path = (dir / "crashnet.db").string();
    ServerStack server(cfg, std::make_unique<GazetteerGeocoder>(demo_gazetteer()));
    result.driver = demo_driver();
    server.store().upsert_driver(result.driver);

    using Clock = std::chrono::steady_clock;
    std::mutex mu;
    std::optional<Clock::time_point> logged_at;
    std::optional<Clock::time_point> dispatched_at;
    server.dispatcher().on_dispatched = [&](EventId) {
      std::lock_guard lock(mu);
      if (!dispatched_at) dispatched_at = Clock::now();
    };
    server.start();

    const auto trace = generate_trace(demo_scenario(opts.seed, opts.crash));
    BlackBox box(dir / "blackbox");
    TcpLink link({"127.0.0.1", server.wire_port()});
    Agent agent(box, link);
    agent.on_logged = [&](const BlackBoxEntry& e) {
      std::lock_guard lock(mu);
      if (e.report.type == EventKind::crash && !logged_at) logged_at = Clock::now();
    };
    result.run = agent.replay(trace, kDemoDriverId, DetectionConfig{});
    server.dispatcher().wait_idle(std::chrono::seconds(30));

    {
      std::lock_guard lock(mu);
      if (logged_at && dispatched_at)
        result.detection_to_outbox_ms =
            std::chrono::duration<double, std::milli>(*dispatched_at - *logged_at).count();
    }
    result.events = server.store().query_events(0, std::numeric_limits<TimestampMs>::max());
    result.outbox = server.outbox().list();
    server.stop();
  }
  if (temp) {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
  return result;
}

void print_demo(const DemoResult& r, std::ostream& out) {
  out << "detected " << r.run.detected << ", acked " << r.run.acked << ", retransmissions "
      << r.run.retransmissions << "\n";
  out << "events (" << r.events.size() << "):\n";
  for (const auto& e : r.events) {
    out << "  #" << e.event_id << " " << to_string(e.report.type) << " t=" << e.report.t
        << " lat=" << fixed(e.report.lat, 5) << " lon=" << fixed(e.report.lon, 5)
        << " speed=" << fixed(e.report.speed_kmh, 1) << " g=" << fixed(e.report.g_force, 2);
    if (e.report.collision) out << " collision=" << to_string(*e.report.collision);
    out << "\n";
  }
  out << "outbox (" << r.outbox.size() << "):\n";
  for (const auto& n : r.outbox) {
    out << "  #" << n.notif_id << " event " << n.event_id << " " << to_string(n.kind) << " to "
        << n.to << " [" << to_string(n.status) << ", attempts " << n.attempts << "]\n";
    out << "    " << n.message << "\n";
  }
  if (r.detection_to_outbox_ms)
    out << "detection to outbox: " << fixed(*r.detection_to_outbox_ms, 1) << " ms\n";
}

}  // namespace crashnet
