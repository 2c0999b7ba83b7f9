#include "crashnet/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "crashnet/util.hpp"
#include "crashnet/wire.hpp"

namespace crashnet {

namespace {

constexpr std::string_view kMagic = "#crashnet-trace";

template <typename T>
T parse_num(std::string_view s, std::size_t line, const char* what) {
  s = trim(s);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw TraceError(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return value;
}

TimestampMs row_t(const TraceFile::Row& row) {
  return std::visit([](const auto& r) { return r.t; }, row);
}

}  // namespace

std::vector<AccelSample> TraceFile::samples() const {
  std::vector<AccelSample> out;
  for (const auto& row : rows)
    if (auto* s = std::get_if<AccelSample>(&row)) out.push_back(*s);
  return out;
}

std::vector<GpsFix> TraceFile::fixes() const {
  std::vector<GpsFix> out;
  for (const auto& row : rows)
    if (auto* f = std::get_if<GpsFix>(&row)) out.push_back(*f);
  return out;
}

DetectionConfig TraceFile::apply_overrides(DetectionConfig cfg) const {
  for (const auto& [key, value] : config_overrides) {
    if (key == "gravity_mps2") cfg.gravity_mps2 = parse_num<double>(value, 1, key.c_str());
    else if (key == "crash_g") cfg.crash_g = parse_num<double>(value, 1, key.c_str());
    else if (key == "pothole_g_min") cfg.pothole_g_min = parse_num<double>(value, 1, key.c_str());
    else if (key == "pothole_max_duration_ms")
      cfg.pothole_max_duration_ms = parse_num<std::int64_t>(value, 1, key.c_str());
    else if (key == "debounce_ms") cfg.debounce_ms = parse_num<std::int64_t>(value, 1, key.c_str());
    else if (key == "full_scale_g") cfg.full_scale_g = parse_num<double>(value, 1, key.c_str());
    else throw TraceError(1, "unknown config override '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TraceFile parse_trace(std::istream& in) {
  TraceFile trace;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw TraceError(1, "empty trace");
  ++lineno;
  {
    auto fields = split_csv_line(line);
    if (fields.empty() || trim(fields[0]) != kMagic) throw TraceError(1, "missing trace header");
    bool have_version = false;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string::npos) throw TraceError(1, "header field without '='");
      std::string key(trim(std::string_view(fields[i]).substr(0, eq)));
      std::string value(trim(std::string_view(fields[i]).substr(eq + 1)));
      if (key == "v") {
        if (value != "1") throw TraceError(1, "unsupported trace version " + value);
        have_version = true;
      } else if (key == "device") {
        trace.device_id = value;
      } else {
        trace.config_overrides[key] = value;
      }
    }
    if (!have_version) throw TraceError(1, "header lacks v=");
  }

  TimestampMs last_t = std::numeric_limits<TimestampMs>::min();
  bool last_was_accel = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw TraceError(lineno, "expected 5 fields");
    const auto kind = trim(f[0]);
    const auto t = parse_num<TimestampMs>(f[1], lineno, "t");
    if (t < last_t) throw TraceError(lineno, "rows not sorted by t");
    if (kind == "A") {
      AccelSample s{t, parse_num<double>(f[2], lineno, "ax"), parse_num<double>(f[3], lineno, "ay"),
                    parse_num<double>(f[4], lineno, "az")};
      trace.rows.emplace_back(s);
      last_was_accel = true;
    } else if (kind == "G") {
      if (t == last_t && last_was_accel)
        throw TraceError(lineno, "G row must precede A rows with the same t");
      GpsFix g{t, parse_num<double>(f[2], lineno, "lat"), parse_num<double>(f[3], lineno, "lon"),
               parse_num<double>(f[4], lineno, "speed_kmh")};
      if (g.lat < -90 || g.lat > 90 || g.lon < -180 || g.lon > 180 || g.speed_kmh < 0)
        throw TraceError(lineno, "GPS fix out of range");
      trace.rows.emplace_back(g);
      last_was_accel = false;
    } else {
      throw TraceError(lineno, "unknown row kind '" + std::string(kind) + "'");
    }
    last_t = t;
  }
  return trace;
}

TraceFile load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  return parse_trace(in);
}

void write_trace(const TraceFile& trace, std::ostream& out) {
  out << kMagic << ",v=1,device=" << trace.device_id;
  for (const auto& [k, v] : trace.config_overrides) out << ',' << k << '=' << v;
  out << '\n';
  using wire::format_number;
  for (const auto& row : trace.rows) {
    if (auto* s = std::get_if<AccelSample>(&row)) {
      out << "A," << s->t << ',' << format_number(s->ax) << ',' << format_number(s->ay) << ','
          << format_number(s->az) << '\n';
    } else {
      const auto& g = std::get<GpsFix>(row);
      out << "G," << g.t << ',' << format_number(g.lat) << ',' << format_number(g.lon) << ','
          << format_number(g.speed_kmh) << '\n';
    }
  }
}

std::string trace_to_string(const TraceFile& trace) {
  std::ostringstream out;
  write_trace(trace, out);
  return out.str();
}

// ---------------------------------------------------------------------------

static double route_length_m(const ScenarioSpec& spec) {
  double total = 0.0;
  for (std::size_t i = 1; i < spec.route.size(); ++i)
    total += haversine_m(spec.route[i - 1].first, spec.route[i - 1].second, spec.route[i].first,
                         spec.route[i].second);
  return total;
}

std::int64_t ScenarioSpec::effective_duration_ms() const {
  if (duration_ms > 0) return duration_ms;
  if (cruise_speed_kmh <= 0.0) return 0;
  const double seconds = route_length_m(*this) / (cruise_speed_kmh / 3.6);
  return static_cast<std::int64_t>(std::ceil(seconds * 1000.0));
}

void validate(const ScenarioSpec& spec) {
  if (spec.device_id.empty()) throw SpecError("device_id must be non-empty");
  if (spec.route.empty()) throw SpecError("route needs at least one waypoint");
  for (const auto& [lat, lon] : spec.route)
    if (!(lat >= -90 && lat <= 90 && lon >= -180 && lon <= 180))
      throw SpecError("route waypoint out of range");
  if (!(spec.sample_rate_hz > 0) || !(spec.fix_rate_hz > 0)) throw SpecError("rates must be > 0");
  if (spec.sample_rate_hz > 1000 || spec.fix_rate_hz > 1000)
    throw SpecError("rates above 1000 Hz cannot be represented in ms timestamps");
  if (!(spec.cruise_speed_kmh >= 0)) throw SpecError("cruise_speed_kmh must be >= 0");
  if (spec.start_t < 0) throw SpecError("start_t must be >= 0");
  if (!(spec.noise_g >= 0 && spec.noise_g <= 0.5)) throw SpecError("noise_g must be in [0, 0.5]");
  const auto duration = spec.effective_duration_ms();
  if (duration <= 0) throw SpecError("trace duration is zero; set duration_ms");
  for (const auto& inj : spec.injections) {
    if (inj.t < 0 || inj.t + inj.duration_ms > duration)
      throw SpecError("injection outside the trace duration");
    if (inj.duration_ms <= 0) throw SpecError("injection duration must be > 0");
    if (!std::isfinite(inj.peak_g)) throw SpecError("injection peak must be finite");
  }
}

ScenarioSpec parse_scenario(const std::string& text) {
  using nlohmann::json;
  ScenarioSpec spec;
  try {
    const json doc = json::parse(text);
    spec.device_id = doc.value("device_id", spec.device_id);
    for (const auto& wp : doc.at("route")) spec.route.emplace_back(wp.at(0), wp.at(1));
    spec.cruise_speed_kmh = doc.value("cruise_speed_kmh", spec.cruise_speed_kmh);
    spec.sample_rate_hz = doc.value("sample_rate_hz", spec.sample_rate_hz);
    spec.fix_rate_hz = doc.value("fix_rate_hz", spec.fix_rate_hz);
    spec.duration_ms = doc.value("duration_ms", spec.duration_ms);
    spec.start_t = doc.value("start_t", spec.start_t);
    spec.noise_g = doc.value("noise_g", spec.noise_g);
    spec.seed = doc.value("seed", spec.seed);
    if (doc.contains("injections")) {
      for (const auto& j : doc.at("injections")) {
        Injection inj;
        inj.t = j.at("t");
        const std::string kind = j.at("kind");
        if (kind == "crash_x") inj.kind = InjectionKind::crash_x;
        else if (kind == "crash_y") inj.kind = InjectionKind::crash_y;
        else if (kind == "pothole") inj.kind = InjectionKind::pothole;
        else throw SpecError("unknown injection kind '" + kind + "'");
        inj.peak_g = j.at("peak_g");
        inj.duration_ms = j.value("duration_ms", inj.duration_ms);
        spec.injections.push_back(inj);
      }
    }
  } catch (const json::exception& e) {
    throw SpecError(std::string("scenario: ") + e.what());
  }
  validate(spec);
  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

namespace {

/// Position after travelling `dist` metres along the route.
std::pair<double, double> position_along(const ScenarioSpec& spec, double dist) {
  for (std::size_t i = 1; i < spec.route.size(); ++i) {
    const auto [la0, lo0] = spec.route[i - 1];
    const auto [la1, lo1] = spec.route[i];
    const double seg = haversine_m(la0, lo0, la1, lo1);
    if (dist <= seg && seg > 0) {
      const double f = dist / seg;
      return {la0 + (la1 - la0) * f, lo0 + (lo1 - lo0) * f};
    }
    dist -= seg;
  }
  return spec.route.back();
}

// mt19937_64 output is fully specified, so this stays identical across
// standard libraries (std::uniform_real_distribution is not).
double uniform(std::mt19937_64& rng, double amplitude) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * amplitude;
}

int injection_axis(InjectionKind k) {
  switch (k) {
    case InjectionKind::crash_x: return 0;
    case InjectionKind::crash_y: return 1;
    case InjectionKind::pothole: return 2;
  }
  return 2;
}

}  // namespace

TraceFile generate_trace(const ScenarioSpec& spec) {
  validate(spec);
  constexpr double kGravity = 9.80665;
  const std::int64_t duration = spec.effective_duration_ms();
  const double speed_mps = spec.cruise_speed_kmh / 3.6;
  const double route_len = route_length_m(spec);

  TraceFile trace;
  trace.device_id = spec.device_id;
  std::mt19937_64 rng(spec.seed);

  const auto n_samples = static_cast<std::int64_t>(
      std::floor(static_cast<double>(duration) * spec.sample_rate_hz / 1000.0)) + 1;
  const auto n_fixes = static_cast<std::int64_t>(
      std::floor(static_cast<double>(duration) * spec.fix_rate_hz / 1000.0)) + 1;

  auto sample_t = [&](std::int64_t i) {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(i) * 1000.0 /
                                                  spec.sample_rate_hz));
  };
  auto fix_t = [&](std::int64_t i) {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(i) * 1000.0 /
                                                  spec.fix_rate_hz));
  };

  std::int64_t si = 0, fi = 0;
  while (si < n_samples || fi < n_fixes) {
    const bool take_fix = fi < n_fixes && (si >= n_samples || fix_t(fi) <= sample_t(si));
    if (take_fix) {
      const std::int64_t rel = fix_t(fi++);
      const double dist = speed_mps * static_cast<double>(rel) / 1000.0;
      const auto [lat, lon] = position_along(spec, dist);
      const bool moving = route_len > 0 ? dist < route_len : true;
      trace.rows.emplace_back(
          GpsFix{spec.start_t + rel, lat, lon, moving ? spec.cruise_speed_kmh : 0.0});
      continue;
    }
    const std::int64_t rel = sample_t(si++);
    double g[3];
    for (double& axis : g) axis = uniform(rng, spec.noise_g);
    bool injected[3] = {false, false, false};
    double impulse[3] = {0.0, 0.0, 0.0};
    for (const auto& inj : spec.injections) {
      if (rel < inj.t || rel > inj.t + inj.duration_ms) continue;
      const int axis = injection_axis(inj.kind);
      const double phase = static_cast<double>(rel - inj.t) / static_cast<double>(inj.duration_ms);
      impulse[axis] += inj.peak_g * std::sin(std::numbers::pi * phase);
      injected[axis] = true;
    }
    for (int a = 0; a < 3; ++a)
      if (injected[a]) g[a] = impulse[a];
    trace.rows.emplace_back(AccelSample{spec.start_t + rel, g[0] * kGravity, g[1] * kGravity,
                                        g[2] * kGravity});
  }
  std::stable_sort(trace.rows.begin(), trace.rows.end(),
                   [](const auto& a, const auto& b) { return row_t(a) < row_t(b); });
  return trace;
}

}  // namespace crashnet
