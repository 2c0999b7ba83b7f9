#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "crashnet/detection.hpp"

namespace crashnet::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 7080;
inline constexpr std::size_t kMaxFrameBytes = 64 * 1024;

/// One detected event as it crosses the wire. (driver_id, seq) is its key.
struct EventReport {
  int v = kProtocolVersion;
  std::uint64_t seq = 1;
  std::string driver_id;
  EventKind type = EventKind::pothole;
  TimestampMs t = 0;
  double lat = 0.0;
  double lon = 0.0;
  double speed_kmh = 0.0;
  Axis max_axis = Axis::z;
  double g_force = 0.0;
  double magnitude_pct = 0.0;
  std::optional<Collision> collision;

  bool operator==(const EventReport&) const = default;
};

struct Ack {
  std::uint64_t ack = 1;
};

/// Malformed JSON, or bytes that are not a single frame.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A well-formed frame that breaks a field rule. field() names the field.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Frame carries a protocol version this build does not speak.
struct VersionError : ValidationError {
  explicit VersionError(long long v)
      : ValidationError("v", "unsupported protocol version " + std::to_string(v)) {}
};

struct EncodeError : ValidationError {
  using ValidationError::ValidationError;
};

/// Throws ValidationError (field named) when r breaks an invariant.
void validate(const EventReport& r);

/// One JSON object, fixed field order, terminated by '\n'.
std::string encode_report(const EventReport& r);

/// Accepts the frame with or without its trailing newline.
EventReport decode_report(std::string_view frame);

std::string encode_ack(std::uint64_t seq);

/// `{"err":"<field>","seq":N}\n`; seq is null when the frame had none.
std::string encode_error(std::string_view field, std::optional<std::uint64_t> seq);

/// Server reply to a report frame.
struct Reply {
  std::optional<std::uint64_t> ack;
  std::optional<std::string> err;
  std::optional<std::uint64_t> err_seq;
};
Reply decode_reply(std::string_view line);

/// Best-effort extraction of "seq" from a frame that failed validation.
std::optional<std::uint64_t> peek_seq(std::string_view frame);

/// Builds the wire form of a detected event.
EventReport to_report(const DetectedEvent& ev, std::uint64_t seq);

/// Shortest decimal text that parses back to exactly x.
std::string format_number(double x);

/// Incremental newline splitter for a byte stream.
class FrameSplitter {
 public:
  explicit FrameSplitter(std::size_t max_frame = kMaxFrameBytes) : max_(max_frame) {}

  void feed(std::string_view bytes) { buf_.append(bytes); }

  /// Next complete line without its newline. Throws ParseError when a line
  /// grows past the frame limit.
  std::optional<std::string> next();

  std::size_t buffered() const { return buf_.size(); }

 private:
  std::string buf_;
  std::size_t max_;
};

}  // namespace crashnet::wire
