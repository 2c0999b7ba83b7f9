#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "crashnet/detection.hpp"

namespace crashnet {

/// Sensor trace: a header followed by time-sorted rows
///
///   #crashnet-trace,v=1,device=<id>[,<config key>=<value>...]
///   G,<t>,<lat>,<lon>,<speed_kmh>
///   A,<t>,<ax>,<ay>,<az>
///
/// Config keys are the DetectionConfig field names. On equal timestamps a
/// G row comes before an A row.
struct TraceFile {
  using Row = std::variant<AccelSample, GpsFix>;

  std::string device_id;
  std::map<std::string, std::string> config_overrides;
  std::vector<Row> rows;

  std::vector<AccelSample> samples() const;
  std::vector<GpsFix> fixes() const;

  /// base with the header overrides applied.
  DetectionConfig apply_overrides(DetectionConfig base) const;
};

struct TraceError : std::runtime_error {
  TraceError(std::size_t line, const std::string& what)
      : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

TraceFile parse_trace(std::istream& in);
TraceFile load_trace(const std::string& path);
void write_trace(const TraceFile& trace, std::ostream& out);
std::string trace_to_string(const TraceFile& trace);

enum class InjectionKind { crash_x, crash_y, pothole };

struct Injection {
  /// Offset from the trace start, ms.
  std::int64_t t = 0;
  InjectionKind kind = InjectionKind::pothole;
  /// Signed peak in G on the injection axis.
  double peak_g = 0.0;
  std::int64_t duration_ms = 50;
};

struct ScenarioSpec {
  std::string device_id = "vehicle-1";
  std::vector<std::pair<double, double>> route;
  double cruise_speed_kmh = 50.0;
  double sample_rate_hz = 100.0;
  double fix_rate_hz = 1.0;
  /// 0 means the time needed to drive the route at cruise speed.
  std::int64_t duration_ms = 0;
  TimestampMs start_t = 0;
  /// Baseline noise amplitude per axis, G. At most 0.5.
  double noise_g = 0.3;
  std::vector<Injection> injections;
  std::uint64_t seed = 1;

  std::int64_t effective_duration_ms() const;
};

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

void validate(const ScenarioSpec& spec);

/// JSON form: {"device_id", "route": [[lat, lon], ...], "cruise_speed_kmh",
/// "sample_rate_hz", "fix_rate_hz", "duration_ms", "start_t", "noise_g",
/// "injections": [{"t", "kind", "peak_g", "duration_ms"}], "seed"}.
ScenarioSpec parse_scenario(const std::string& json_text);
ScenarioSpec load_scenario(const std::string& path);

/// Deterministic for a given spec and seed. Injected axes follow a half-sine
/// of the given peak and duration; every other sample is uniform noise.
TraceFile generate_trace(const ScenarioSpec& spec);

}  // namespace crashnet
