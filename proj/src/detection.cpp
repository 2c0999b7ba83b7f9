#include "crashnet/detection.hpp"

#include <algorithm>
#include <cmath>

namespace crashnet {

const char* to_string(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

const char* to_string(Collision c) {
  switch (c) {
    case Collision::head_on: return "head_on";
    case Collision::rear_end: return "rear_end";
    case Collision::t_bone_left: return "t_bone_left";
    case Collision::t_bone_right: return "t_bone_right";
    case Collision::vertical: return "vertical";
  }
  return "?";
}

const char* to_string(EventKind k) {
  return k == EventKind::crash ? "crash" : "pothole";
}

std::optional<Axis> parse_axis(std::string_view s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  return std::nullopt;
}

std::optional<Collision> parse_collision(std::string_view s) {
  for (auto c : {Collision::head_on, Collision::rear_end, Collision::t_bone_left,
                 Collision::t_bone_right, Collision::vertical}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  if (s == "crash") return EventKind::crash;
  if (s == "pothole") return EventKind::pothole;
  return std::nullopt;
}

void DetectionConfig::validate() const {
  if (!(gravity_mps2 > 0.0) || !std::isfinite(gravity_mps2))
    throw ConfigError("gravity_mps2 must be positive");
  if (!(pothole_g_min > 0.0 && pothole_g_min < crash_g && crash_g <= full_scale_g))
    throw ConfigError("thresholds must satisfy 0 < pothole_g_min < crash_g <= full_scale_g");
  if (pothole_max_duration_ms <= 0 || debounce_ms <= 0)
    throw ConfigError("durations must be positive");
}

GVector to_g_force(const AccelSample& sample, const DetectionConfig& cfg) {
  if (!std::isfinite(sample.ax) || !std::isfinite(sample.ay) || !std::isfinite(sample.az))
    throw InvalidSampleError("non-finite acceleration component");
  return {sample.ax / cfg.gravity_mps2, sample.ay / cfg.gravity_mps2,
          sample.az / cfg.gravity_mps2};
}

Impulse classify_impulse(const GVector& g, const DetectionConfig& cfg) {
  const double peak = std::max({std::abs(g.gx), std::abs(g.gy), std::abs(g.gz)});
  // "exceeds": the threshold itself is not a crash.
  if (peak > cfg.crash_g) return Impulse::crash;
  if (std::abs(g.gz) >= cfg.pothole_g_min) return Impulse::pothole_candidate;
  return Impulse::none;
}

Axis dominant_axis(const GVector& g) {
  const double ax = std::abs(g.gx), ay = std::abs(g.gy), az = std::abs(g.gz);
  if (ax >= ay && ax >= az) return Axis::x;
  if (ay >= az) return Axis::y;
  return Axis::z;
}

static double component(const GVector& g, Axis a) {
  switch (a) {
    case Axis::x: return g.gx;
    case Axis::y: return g.gy;
    case Axis::z: return g.gz;
  }
  return 0.0;
}

Collision classify_collision(const GVector& peak) {
  const Axis axis = dominant_axis(peak);
  switch (axis) {
    case Axis::x: return peak.gx < 0.0 ? Collision::head_on : Collision::rear_end;
    case Axis::y: return peak.gy > 0.0 ? Collision::t_bone_left : Collision::t_bone_right;
    case Axis::z: return Collision::vertical;
  }
  return Collision::vertical;
}

CrashSummary crash_summary(std::span<const GVector> window, const DetectionConfig& cfg) {
  if (window.empty()) throw std::invalid_argument("crash_summary: empty window");

  const GVector* peak = nullptr;
  double best = -1.0;
  for (const auto& g : window) {
    const double m = std::abs(component(g, dominant_axis(g)));
    if (m > best) {
      best = m;
      peak = &g;
    }
  }
  if (!(best > cfg.crash_g))
    throw std::invalid_argument("crash_summary: window holds no crash-classified vector");

  CrashSummary s;
  s.max_axis = dominant_axis(*peak);
  s.g_force = best;
  const double norm = std::sqrt(peak->gx * peak->gx + peak->gy * peak->gy + peak->gz * peak->gz);
  s.magnitude_pct = 100.0 * norm / cfg.full_scale_g;
  s.collision = classify_collision(*peak);
  return s;
}

// ---------------------------------------------------------------------------

Detector::Detector(std::string driver_id, DetectionConfig cfg)
    : driver_id_(std::move(driver_id)), cfg_(cfg) {
  if (driver_id_.empty()) throw std::invalid_argument("driver_id must be non-empty");
  cfg_.validate();
}

DetectedEvent Detector::make_crash(const CrashImpulse& imp) const {
  DetectedEvent ev;
  ev.kind = EventKind::crash;
  ev.t = imp.first_t;
  if (imp.fix) ev.fix = *imp.fix;
  ev.speed_kmh = ev.fix.speed_kmh;
  ev.crash = crash_summary(imp.window, cfg_);
  ev.driver_id = driver_id_;
  ev.stale_fix = !imp.fix.has_value();
  return ev;
}

DetectedEvent Detector::make_pothole(const PendingPothole& p) const {
  DetectedEvent ev;
  ev.kind = EventKind::pothole;
  ev.t = p.t;
  if (p.fix) ev.fix = *p.fix;
  ev.speed_kmh = ev.fix.speed_kmh;
  ev.pothole = PotholeSummary{p.peak, 100.0 * p.peak / cfg_.full_scale_g};
  ev.driver_id = driver_id_;
  ev.stale_fix = !p.fix.has_value();
  return ev;
}

void Detector::emit(DetectedEvent ev, std::vector<DetectedEvent>& out) {
  if (ev.stale_fix) {
    // The first fix seen is the earliest one after the event.
    if (!first_fix_) {
      deferred_.push_back(std::move(ev));
      return;
    }
    ev.fix = *first_fix_;
    ev.speed_kmh = ev.fix.speed_kmh;
  }
  out.push_back(std::move(ev));
}

void Detector::close_crash(std::vector<DetectedEvent>& out) {
  if (!crash_) return;
  emit(make_crash(*crash_), out);
  crash_.reset();
}

void Detector::release_pothole(std::vector<DetectedEvent>& out) {
  if (!pending_pothole_) return;
  emit(make_pothole(*pending_pothole_), out);
  pending_pothole_.reset();
}

void Detector::close_zrun(std::vector<DetectedEvent>& out) {
  if (!zrun_) return;
  ZRun run = *zrun_;
  zrun_.reset();
  (void)out;
  if (run.tainted) return;
  if (!(run.peak < cfg_.crash_g)) return;
  if (run.last_t - run.first_t > cfg_.pothole_max_duration_ms) return;
  if (last_emitted_t_ && run.first_t - *last_emitted_t_ < cfg_.debounce_ms) return;
  // Held until debounce_ms passes without a crash.
  pending_pothole_ = PendingPothole{run.first_t, run.fix, run.peak};
  last_emitted_t_ = run.first_t;
}

void Detector::advance_to(TimestampMs t, std::vector<DetectedEvent>& out) {
  if (crash_ && t - crash_->last_crash_t > cfg_.debounce_ms) close_crash(out);
  if (pending_pothole_ && t - pending_pothole_->t >= cfg_.debounce_ms) release_pothole(out);
}

std::vector<DetectedEvent> Detector::push_fix(const GpsFix& fix) {
  if (!std::isfinite(fix.lat) || !std::isfinite(fix.lon) || fix.lat < -90.0 || fix.lat > 90.0 ||
      fix.lon < -180.0 || fix.lon > 180.0 || !(fix.speed_kmh >= 0.0) ||
      !std::isfinite(fix.speed_kmh))
    throw InvalidSampleError("GPS fix out of range");
  if (last_fix_t_ && fix.t < *last_fix_t_) throw StreamOrderError("GPS fixes out of order");
  if (last_sample_t_ && fix.t < *last_sample_t_)
    throw StreamOrderError("GPS fix precedes an already processed sample");
  last_fix_t_ = fix.t;

  std::vector<DetectedEvent> out;
  if (!first_fix_) {
    first_fix_ = fix;
    for (auto& ev : deferred_) {
      ev.fix = fix;
      ev.speed_kmh = fix.speed_kmh;
      out.push_back(std::move(ev));
    }
    deferred_.clear();
  }
  last_fix_ = fix;
  advance_to(fix.t, out);
  return out;
}

std::vector<DetectedEvent> Detector::push_sample(const AccelSample& sample) {
  if (sample.t < 0) throw InvalidSampleError("negative sample timestamp");
  if (last_sample_t_ && sample.t < *last_sample_t_)
    throw StreamOrderError("accelerometer samples out of order");
  if (last_fix_t_ && sample.t < *last_fix_t_)
    throw StreamOrderError("sample precedes an already processed GPS fix");
  const GVector g = to_g_force(sample, cfg_);
  last_sample_t_ = sample.t;

  std::vector<DetectedEvent> out;
  advance_to(sample.t, out);

  const Impulse cls = classify_impulse(g, cfg_);
  const double gz = std::abs(g.gz);
  const bool z_high = gz >= cfg_.pothole_g_min;

  if (!z_high) close_zrun(out);

  if (cls == Impulse::crash) {
    if (crash_) {
      crash_->last_crash_t = sample.t;
      crash_->window.push_back(g);
    } else {
      crash_ = CrashImpulse{sample.t, sample.t, last_fix_, {g}};
      // A crash within debounce_ms supersedes a pothole that is still held.
      if (pending_pothole_) pending_pothole_.reset();
      last_emitted_t_ = sample.t;
    }
  }

  if (z_high) {
    if (!zrun_) zrun_ = ZRun{sample.t, sample.t, last_fix_, gz, false};
    zrun_->last_t = sample.t;
    zrun_->peak = std::max(zrun_->peak, gz);
    if (crash_) zrun_->tainted = true;
  }
  return out;
}

std::vector<DetectedEvent> Detector::finish() {
  std::vector<DetectedEvent> out;
  close_zrun(out);
  close_crash(out);
  release_pothole(out);
  return out;
}

std::vector<DetectedEvent> run_detector(std::span<const AccelSample> samples,
                                        std::span<const GpsFix> fixes,
                                        const std::string& driver_id,
                                        const DetectionConfig& cfg) {
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].t < samples[i - 1].t) throw StreamOrderError("samples not sorted by t");
  for (std::size_t i = 1; i < fixes.size(); ++i)
    if (fixes[i].t < fixes[i - 1].t) throw StreamOrderError("fixes not sorted by t");

  Detector det(driver_id, cfg);
  std::vector<DetectedEvent> events;
  auto take = [&events](std::vector<DetectedEvent>&& evs) {
    for (auto& e : evs) events.push_back(std::move(e));
  };
  std::size_t fi = 0;
  for (const auto& s : samples) {
    while (fi < fixes.size() && fixes[fi].t <= s.t) take(det.push_fix(fixes[fi++]));
    take(det.push_sample(s));
  }
  while (fi < fixes.size()) take(det.push_fix(fixes[fi++]));
  take(det.finish());
  return events;
}

}  // namespace crashnet
