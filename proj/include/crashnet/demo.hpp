#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "crashnet/agent.hpp"
#include "crashnet/dispatch.hpp"
#include "crashnet/geocode.hpp"
#include "crashnet/store.hpp"
#include "crashnet/trace.hpp"

namespace crashnet {

inline constexpr const char* kDemoDriverId = "demo-driver";

/// Two potholes and, unless crash is false, one head-on crash.
ScenarioSpec demo_scenario(std::uint64_t seed, bool crash = true);
DriverRecord demo_driver();
/// Street corners along the demo route, roughly 110 m apart.
std::vector<GazetteerEntry> demo_gazetteer();

struct DemoOptions {
  std::uint64_t seed = 7;
  bool crash = true;
  /// Empty: a fresh temporary directory, removed afterwards.
  std::filesystem::path workdir;
};

struct DemoResult {
  RunReport run;
  std::vector<EventRecord> events;
  std::vector<NotificationRecord> outbox;
  DriverRecord driver;
  /// Wall time from logging the crash on the device to its last
  /// notification record being final.
  std::optional<double> detection_to_outbox_ms;
};

/// Runs an in-process server on ephemeral ports and replays the scenario
/// against it through the black box and a TCP link.
DemoResult run_demo(const DemoOptions& opts);
void print_demo(const DemoResult& r, std::ostream& out);

}  // namespace crashnet
