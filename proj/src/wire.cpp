#include "crashnet/wire.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace crashnet::wire {

using nlohmann::json;

std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

static void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ValidationError(field, what);
}

void validate(const EventReport& r) {
  require(r.v == kProtocolVersion, "v", "unsupported protocol version");
  require(r.seq >= 1, "seq", "must be >= 1");
  require(!r.driver_id.empty(), "driver_id", "must be non-empty");
  require(r.t >= 0, "t", "must be non-negative");
  require(std::isfinite(r.lat) && r.lat >= -90.0 && r.lat <= 90.0, "lat", "out of range");
  require(std::isfinite(r.lon) && r.lon >= -180.0 && r.lon <= 180.0, "lon", "out of range");
  require(std::isfinite(r.speed_kmh) && r.speed_kmh >= 0.0, "speed_kmh", "must be >= 0");
  require(std::isfinite(r.g_force) && r.g_force >= 0.0, "g_force", "must be >= 0");
  require(std::isfinite(r.magnitude_pct) && r.magnitude_pct >= 0.0, "magnitude_pct",
          "must be >= 0");
  if (r.type == EventKind::pothole) {
    require(!r.collision.has_value(), "collision", "must be null for potholes");
    require(r.max_axis == Axis::z, "max_axis", "must be z for potholes");
  } else {
    require(r.collision.has_value(), "collision", "required for crashes");
  }
}

std::string encode_report(const EventReport& r) {
  try {
    validate(r);
  } catch (const ValidationError& e) {
    throw EncodeError(e.field(), e.what());
  }
  std::string driver;
  try {
    driver = json(r.driver_id).dump();
  } catch (const json::exception&) {
    throw EncodeError("driver_id", "not valid UTF-8");
  }

  std::string out;
  out.reserve(200);
  out += "{\"v\":";
  out += std::to_string(r.v);
  out += ",\"seq\":";
  out += std::to_string(r.seq);
  out += ",\"driver_id\":";
  out += driver;
  out += ",\"type\":\"";
  out += to_string(r.type);
  out += "\",\"t\":";
  out += std::to_string(r.t);
  out += ",\"lat\":";
  out += format_number(r.lat);
  out += ",\"lon\":";
  out += format_number(r.lon);
  out += ",\"speed_kmh\":";
  out += format_number(r.speed_kmh);
  out += ",\"max_axis\":\"";
  out += to_string(r.max_axis);
  out += "\",\"g_force\":";
  out += format_number(r.g_force);
  out += ",\"magnitude_pct\":";
  out += format_number(r.magnitude_pct);
  out += ",\"collision\":";
  if (r.collision) {
    out += '"';
    out += to_string(*r.collision);
    out += '"';
  } else {
    out += "null";
  }
  out += "}\n";
  return out;
}

namespace {

std::string_view strip_newline(std::string_view frame) {
  if (!frame.empty() && frame.back() == '\n') frame.remove_suffix(1);
  if (frame.find('\n') != std::string_view::npos)
    throw ParseError("frame contains an embedded newline");
  return frame;
}

json parse_object(std::string_view frame) {
  json doc = json::parse(frame.begin(), frame.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ParseError("malformed JSON");
  if (!doc.is_object()) throw ParseError("frame is not a JSON object");
  return doc;
}

const json& field(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) throw ValidationError(name, "missing");
  return *it;
}

double number_field(const json& doc, const char* name) {
  const json& j = field(doc, name);
  if (!j.is_number()) throw ValidationError(name, "must be a number");
  return j.get<double>();
}

std::string string_field(const json& doc, const char* name) {
  const json& j = field(doc, name);
  if (!j.is_string()) throw ValidationError(name, "must be a string");
  return j.get<std::string>();
}

std::uint64_t unsigned_field(const json& doc, const char* name) {
  const json& j = field(doc, name);
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) throw ValidationError(name, "must be >= 0");
  throw ValidationError(name, "must be an integer");
}

}  // namespace

EventReport decode_report(std::string_view frame) {
  const json doc = parse_object(strip_newline(frame));

  EventReport r;
  {
    const json& v = field(doc, "v");
    if (!v.is_number_integer()) throw ValidationError("v", "must be an integer");
    const auto version = v.get<long long>();
    if (version != kProtocolVersion) throw VersionError(version);
    r.v = static_cast<int>(version);
  }
  r.seq = unsigned_field(doc, "seq");
  r.driver_id = string_field(doc, "driver_id");

  const auto type = parse_event_kind(string_field(doc, "type"));
  if (!type) throw ValidationError("type", "unknown event type");
  r.type = *type;

  const auto t = unsigned_field(doc, "t");
  if (t > static_cast<std::uint64_t>(std::numeric_limits<TimestampMs>::max()))
    throw ValidationError("t", "out of range");
  r.t = static_cast<TimestampMs>(t);

  r.lat = number_field(doc, "lat");
  r.lon = number_field(doc, "lon");
  r.speed_kmh = number_field(doc, "speed_kmh");

  const auto axis = parse_axis(string_field(doc, "max_axis"));
  if (!axis) throw ValidationError("max_axis", "must be x, y or z");
  r.max_axis = *axis;

  r.g_force = number_field(doc, "g_force");
  r.magnitude_pct = number_field(doc, "magnitude_pct");

  const json& coll = field(doc, "collision");
  if (coll.is_null()) {
    r.collision.reset();
  } else if (coll.is_string()) {
    r.collision = parse_collision(coll.get<std::string>());
    if (!r.collision) throw ValidationError("collision", "unknown collision class");
  } else {
    throw ValidationError("collision", "must be a string or null");
  }

  validate(r);
  return r;
}

std::string encode_ack(std::uint64_t seq) {
  return "{\"ack\":" + std::to_string(seq) + "}\n";
}

std::string encode_error(std::string_view field_name, std::optional<std::uint64_t> seq) {
  std::string out = "{\"err\":" + json(std::string(field_name)).dump() + ",\"seq\":";
  out += seq ? std::to_string(*seq) : "null";
  out += "}\n";
  return out;
}

Reply decode_reply(std::string_view line) {
  const json doc = parse_object(strip_newline(line));
  Reply reply;
  if (auto it = doc.find("ack"); it != doc.end()) {
    if (!it->is_number_unsigned()) throw ValidationError("ack", "must be an unsigned integer");
    reply.ack = it->get<std::uint64_t>();
    if (*reply.ack < 1) throw ValidationError("ack", "must be >= 1");
  } else if (auto eit = doc.find("err"); eit != doc.end()) {
    if (!eit->is_string()) throw ValidationError("err", "must be a string");
    reply.err = eit->get<std::string>();
    if (auto sit = doc.find("seq"); sit != doc.end() && sit->is_number_unsigned())
      reply.err_seq = sit->get<std::uint64_t>();
  } else {
    throw ValidationError("ack", "missing");
  }
  return reply;
}

std::optional<std::uint64_t> peek_seq(std::string_view frame) {
  if (!frame.empty() && frame.back() == '\n') frame.remove_suffix(1);
  json doc = json::parse(frame.begin(), frame.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  auto it = doc.find("seq");
  if (it == doc.end() || !it->is_number_unsigned()) return std::nullopt;
  return it->get<std::uint64_t>();
}

EventReport to_report(const DetectedEvent& ev, std::uint64_t seq) {
  EventReport r;
  r.seq = seq;
  r.driver_id = ev.driver_id;
  r.type = ev.kind;
  r.t = ev.t;
  r.lat = ev.fix.lat;
  r.lon = ev.fix.lon;
  r.speed_kmh = ev.speed_kmh;
  if (ev.kind == EventKind::crash) {
    const CrashSummary& s = ev.crash.value();
    r.max_axis = s.max_axis;
    r.g_force = s.g_force;
    r.magnitude_pct = s.magnitude_pct;
    r.collision = s.collision;
  } else {
    const PotholeSummary& p = ev.pothole.value();
    r.max_axis = Axis::z;
    r.g_force = p.g_force;
    r.magnitude_pct = p.magnitude_pct;
  }
  return r;
}

std::optional<std::string> FrameSplitter::next() {
  const auto pos = buf_.find('\n');
  if (pos == std::string::npos) {
    if (buf_.size() > max_) throw ParseError("frame exceeds size limit");
    return std::nullopt;
  }
  if (pos > max_) throw ParseError("frame exceeds size limit");
  std::string line = buf_.substr(0, pos);
  buf_.erase(0, pos + 1);
  return line;
}

}  // namespace crashnet::wire
