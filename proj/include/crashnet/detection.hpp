#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crashnet {

/// Milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

/// Raw accelerometer reading in m/s^2. Axes: x longitudinal (+forward),
/// y lateral (+left), z vertical (+up).
struct AccelSample {
  TimestampMs t = 0;
  double ax = 0.0;
  double ay = 0.0;
  double az = 0.0;
};

struct GpsFix {
  TimestampMs t = 0;
  double lat = 0.0;
  double lon = 0.0;
  double speed_kmh = 0.0;

  bool operator==(const GpsFix&) const = default;
};

/// Dimensionless g-force per axis.
struct GVector {
  double gx = 0.0;
  double gy = 0.0;
  double gz = 0.0;

  bool operator==(const GVector&) const = default;
};

enum class Axis { x, y, z };
enum class Impulse { none, pothole_candidate, crash };
enum class Collision { head_on, rear_end, t_bone_left, t_bone_right, vertical };
enum class EventKind { crash, pothole };

const char* to_string(Axis a);
const char* to_string(Collision c);
const char* to_string(EventKind k);
std::optional<Axis> parse_axis(std::string_view s);
std::optional<Collision> parse_collision(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);

struct DetectionConfig {
  double gravity_mps2 = 9.80665;
  double crash_g = 12.0;
  double pothole_g_min = 3.0;
  std::int64_t pothole_max_duration_ms = 150;
  std::int64_t debounce_ms = 2000;
  double full_scale_g = 16.0;

  /// Throws ConfigError when the thresholds are inconsistent.
  void validate() const;
};

struct CrashSummary {
  Axis max_axis = Axis::x;
  double g_force = 0.0;
  double magnitude_pct = 0.0;
  Collision collision = Collision::head_on;

  bool operator==(const CrashSummary&) const = default;
};

/// Peak vertical shock of a pothole. The axis is always z.
struct PotholeSummary {
  double g_force = 0.0;
  double magnitude_pct = 0.0;

  bool operator==(const PotholeSummary&) const = default;
};

struct DetectedEvent {
  EventKind kind = EventKind::crash;
  TimestampMs t = 0;
  GpsFix fix;
  double speed_kmh = 0.0;
  /// Set for crashes only.
  std::optional<CrashSummary> crash;
  /// Set for potholes only.
  std::optional<PotholeSummary> pothole;
  std::string driver_id;
  /// True when no fix preceded the event and the first later fix was used.
  bool stale_fix = false;

  bool operator==(const DetectedEvent&) const = default;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvalidSampleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct StreamOrderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

GVector to_g_force(const AccelSample& sample, const DetectionConfig& cfg);

Impulse classify_impulse(const GVector& g, const DetectionConfig& cfg);

/// Dominant axis by absolute value; ties resolve x, then y, then z.
Axis dominant_axis(const GVector& g);

Collision classify_collision(const GVector& peak);

/// Throws std::invalid_argument on an empty window or one with no
/// crash-classified vector.
CrashSummary crash_summary(std::span<const GVector> window, const DetectionConfig& cfg);

/// Streaming detector for one vehicle. Feed fixes and samples in time order
/// (a fix and a sample sharing a timestamp: fix first); completed events are
/// returned as soon as they can no longer change.
class Detector {
 public:
  Detector(std::string driver_id, DetectionConfig cfg);

  std::vector<DetectedEvent> push_fix(const GpsFix& fix);
  std::vector<DetectedEvent> push_sample(const AccelSample& sample);
  /// Flushes every pending event at end of stream.
  std::vector<DetectedEvent> finish();

  const DetectionConfig& config() const { return cfg_; }

 private:
  struct CrashImpulse {
    TimestampMs first_t = 0;
    TimestampMs last_crash_t = 0;
    std::optional<GpsFix> fix;
    std::vector<GVector> window;
  };
  struct ZRun {
    TimestampMs first_t = 0;
    TimestampMs last_t = 0;
    std::optional<GpsFix> fix;
    double peak = 0.0;
    bool tainted = false;
  };
  struct PendingPothole {
    TimestampMs t = 0;
    std::optional<GpsFix> fix;
    double peak = 0.0;
  };

  void close_zrun(std::vector<DetectedEvent>& out);
  void close_crash(std::vector<DetectedEvent>& out);
  void release_pothole(std::vector<DetectedEvent>& out);
  void emit(DetectedEvent ev, std::vector<DetectedEvent>& out);
  void advance_to(TimestampMs t, std::vector<DetectedEvent>& out);
  DetectedEvent make_crash(const CrashImpulse& imp) const;
  DetectedEvent make_pothole(const PendingPothole& p) const;

  std::string driver_id_;
  DetectionConfig cfg_;
  std::optional<GpsFix> first_fix_;
  std::optional<GpsFix> last_fix_;
  std::optional<TimestampMs> last_sample_t_;
  std::optional<TimestampMs> last_fix_t_;
  std::optional<CrashImpulse> crash_;
  std::optional<ZRun> zrun_;
  std::optional<PendingPothole> pending_pothole_;
  std::optional<TimestampMs> last_emitted_t_;
  /// Events finalized before any fix existed.
  std::vector<DetectedEvent> deferred_;
};

/// Batch form of Detector over two independently sorted streams.
std::vector<DetectedEvent> run_detector(std::span<const AccelSample> samples,
                                        std::span<const GpsFix> fixes,
                                        const std::string& driver_id,
                                        const DetectionConfig& cfg);

}  // namespace crashnet
