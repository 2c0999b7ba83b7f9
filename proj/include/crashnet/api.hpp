#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include <json.hpp>

#include "crashnet/dispatch.hpp"
#include "crashnet/ingest.hpp"
#include "crashnet/store.hpp"

namespace httplib {
class Server;
}

namespace crashnet::api {

using Json = nlohmann::ordered_json;

inline constexpr std::uint16_t kDefaultPort = 7081;
inline constexpr std::size_t kMaxRows = 10000;
inline constexpr std::int64_t kHourMs = 3'600'000;
inline constexpr std::int64_t kDayMs = 24 * kHourMs;
inline constexpr std::int64_t kWeekMs = 7 * kDayMs;

/// HTTP status plus JSON body.
struct Response {
  int status = 200;
  std::string body;
};

/// 4xx for caller faults, 5xx for server faults.
struct ApiError {
  int status = 400;
  std::string code;
  std::string detail;

  Response to_response() const;
};

using Params = std::map<std::string, std::string>;

Json to_json(const EventRecord& r);
Json to_json(const DriverRecord& d);
Json to_json(const NotificationRecord& n);
Json to_json(const TimeBucketCount& b);
Json to_json(const SpeedStats& s);

/// Epoch milliseconds or RFC 3339 (2024-05-01T12:00:00Z, optional fraction
/// and numeric offset).
std::optional<TimestampMs> parse_timestamp(std::string_view text);

/// hour, day, week.
std::optional<std::int64_t> bucket_ms(std::string_view name);

struct ApiOptions {
  std::string host = "0.0.0.0";
  std::uint16_t port = kDefaultPort;
  std::string cors_origin = "*";
  std::chrono::milliseconds heartbeat{15000};
  std::size_t max_rows = kMaxRows;
  std::function<TimestampMs()> clock;
  int threads = 64;
};

/// Read-only query surface. The get_* handlers are plain functions of store
/// state and parameters; the HTTP layer only routes to them.
class ApiServer {
 public:
  ApiServer(const EventStore& store, const Outbox& outbox, LiveFeed& feed, ApiOptions opts = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  std::uint16_t start();
  void stop();
  std::uint16_t port() const { return port_; }

  Response get_events(const Params& p) const;
  Response get_speeds(const Params& p) const;
  Response get_counts(const Params& p) const;
  Response get_driver(const std::string& driver_id) const;
  Response get_outbox(const Params& p) const;

  /// Formats one live-feed item as a server-sent event.
  static std::string sse_message(const FeedItem& item);

 private:
  /// [from, to) from the query, defaulting to the last 24 hours.
  std::pair<TimestampMs, TimestampMs> range(const Params& p) const;
  TimestampMs now() const;

  const EventStore& store_;
  const Outbox& outbox_;
  LiveFeed& feed_;
  ApiOptions opts_;

  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  std::uint16_t port_ = 0;

  std::mutex subs_mu_;
  std::set<std::shared_ptr<Subscription>> live_subs_;
};

}  // namespace crashnet::api
