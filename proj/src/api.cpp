#include "crashnet/api.hpp"

#include <charconv>
#include <cstdio>

#include <httplib.h>

#include "crashnet/util.hpp"

namespace crashnet::api {

Response ApiError::to_response() const {
  Json body;
  body["status"] = status;
  body["code"] = code;
  body["detail"] = detail;
  return {status, body.dump()};
}

Json to_json(const EventRecord& r) {
  Json j;
  j["event_id"] = r.event_id;
  j["received_at"] = r.received_at;
  j["v"] = r.report.v;
  j["seq"] = r.report.seq;
  j["driver_id"] = r.report.driver_id;
  j["type"] = to_string(r.report.type);
  j["t"] = r.report.t;
  j["lat"] = r.report.lat;
  j["lon"] = r.report.lon;
  j["speed_kmh"] = r.report.speed_kmh;
  j["max_axis"] = to_string(r.report.max_axis);
  j["g_force"] = r.report.g_force;
  j["magnitude_pct"] = r.report.magnitude_pct;
  j["collision"] = r.report.collision ? Json(to_string(*r.report.collision)) : Json(nullptr);
  j["flagged_unknown_driver"] = r.flagged_unknown_driver;
  return j;
}

Json to_json(const DriverRecord& d) {
  Json j;
  j["driver_id"] = d.driver_id;
  j["name"] = d.name;
  j["car"] = d.car;
  j["plate"] = d.plate;
  j["emergency_contact_name"] = d.emergency_contact_name;
  j["emergency_contact_phone"] = d.emergency_contact_phone;
  return j;
}

Json to_json(const NotificationRecord& n) {
  Json j;
  j["notif_id"] = n.notif_id;
  j["event_id"] = n.event_id;
  j["kind"] = to_string(n.kind);
  j["to"] = n.to;
  j["message"] = n.message;
  j["status"] = to_string(n.status);
  j["attempts"] = n.attempts;
  j["last_attempt_at"] = n.last_attempt_at;
  j["reason"] = n.reason;
  return j;
}

Json to_json(const TimeBucketCount& b) {
  Json j;
  j["bucket_start"] = b.bucket_start;
  j["crashes"] = b.crashes;
  j["potholes"] = b.potholes;
  return j;
}

Json to_json(const SpeedStats& s) {
  Json j;
  j["count"] = s.count;
  j["mean"] = s.mean ? Json(*s.mean) : Json(nullptr);
  j["max"] = s.max ? Json(*s.max) : Json(nullptr);
  Json rows = Json::array();
  for (const auto& r : s.rows) {
    Json row;
    row["event_id"] = r.event_id;
    row["t"] = r.t;
    row["speed_kmh"] = r.speed_kmh;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

}  // namespace

std::optional<TimestampMs> parse_timestamp(std::string_view s) {
  if (s.empty()) return std::nullopt;
  {
    TimestampMs v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && ptr == s.data() + s.size()) return v;
  }
  int year, month, day, hour, minute, second;
  if (s.size() < 20 || !read_digits(s, 0, 4, year) || s[4] != '-' ||
      !read_digits(s, 5, 2, month) || s[7] != '-' || !read_digits(s, 8, 2, day) ||
      (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || !read_digits(s, 11, 2, hour) ||
      s[13] != ':' || !read_digits(s, 14, 2, minute) || s[16] != ':' ||
      !read_digits(s, 17, 2, second))
    return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    return std::nullopt;

  std::size_t pos = 19;
  std::int64_t millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int i = digits; i < 3; ++i) millis *= 10;
  }
  std::int64_t offset_min = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const int sign = s[pos] == '-' ? -1 : 1;
    int oh, om;
    if (!read_digits(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !read_digits(s, pos + 4, 2, om))
      return std::nullopt;
    offset_min = sign * (oh * 60 + om);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  const std::int64_t days =
      days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second - offset_min * 60;
  return secs * 1000 + millis;
}

std::optional<std::int64_t> bucket_ms(std::string_view name) {
  if (name == "hour") return kHourMs;
  if (name == "day") return kDayMs;
  if (name == "week") return kWeekMs;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

ApiServer::ApiServer(const EventStore& store, const Outbox& outbox, LiveFeed& feed,
                     ApiOptions opts)
    : store_(store), outbox_(outbox), feed_(feed), opts_(std::move(opts)) {}

ApiServer::~ApiServer() { stop(); }

TimestampMs ApiServer::now() const { return opts_.clock ? opts_.clock() : now_ms(); }

std::pair<TimestampMs, TimestampMs> ApiServer::range(const Params& p) const {
  auto get = [&](const char* key) -> std::optional<TimestampMs> {
    auto it = p.find(key);
    if (it == p.end() || it->second.empty()) return std::nullopt;
    auto v = parse_timestamp(it->second);
    if (!v) throw ApiError{400, "bad_timestamp", std::string("cannot parse '") + key + "'"};
    return v;
  };
  const auto from_p = get("from");
  const auto to_p = get("to");
  const TimestampMs to = to_p ? *to_p : now();
  const TimestampMs from = from_p ? *from_p : to - kDayMs;
  if (from > to) throw ApiError{400, "bad_range", "from must be <= to"};
  return {from, to};
}

Response ApiServer::get_events(const Params& p) const {
  try {
    const auto [from, to] = range(p);
    std::optional<EventKind> type;
    if (auto it = p.find("type"); it != p.end() && !it->second.empty()) {
      type = parse_event_kind(it->second);
      if (!type) throw ApiError{400, "bad_type", "type must be crash or pothole"};
    }
    if (store_.count_events(from, to, type) > opts_.max_rows)
      throw ApiError{413, "too_many_rows", "narrow the range; at most " +
                                               std::to_string(opts_.max_rows) + " rows"};
    Json body = Json::array();
    for (const auto& r : store_.query_events(from, to, type)) body.push_back(to_json(r));
    return {200, body.dump()};
  } catch (const ApiError& e) {
    return e.to_response();
  } catch (const std::exception& e) {
    return ApiError{500, "internal", e.what()}.to_response();
  }
}

Response ApiServer::get_speeds(const Params& p) const {
  try {
    const auto [from, to] = range(p);
    if (store_.count_events(from, to, EventKind::crash) > opts_.max_rows)
      throw ApiError{413, "too_many_rows", "narrow the range"};
    return {200, to_json(store_.speed_stats(from, to)).dump()};
  } catch (const ApiError& e) {
    return e.to_response();
  } catch (const std::exception& e) {
    return ApiError{500, "internal", e.what()}.to_response();
  }
}

Response ApiServer::get_counts(const Params& p) const {
  try {
    const auto [from, to] = range(p);
    const auto it = p.find("bucket");
    const std::string name = it == p.end() || it->second.empty() ? "hour" : it->second;
    const auto width = bucket_ms(name);
    if (!width) throw ApiError{400, "bad_bucket", "bucket must be hour, day or week"};
    const std::int64_t n = (to - from + *width - 1) / *width;
    if (n > static_cast<std::int64_t>(opts_.max_rows))
      throw ApiError{413, "too_many_rows", "too many buckets; widen the bucket"};
    Json body = Json::array();
    for (const auto& b : store_.counts_by_bucket(from, to, *width)) body.push_back(to_json(b));
    return {200, body.dump()};
  } catch (const ApiError& e) {
    return e.to_response();
  } catch (const std::exception& e) {
    return ApiError{500, "internal", e.what()}.to_response();
  }
}

Response ApiServer::get_driver(const std::string& driver_id) const {
  try {
    auto d = store_.get_driver(driver_id);
    if (!d) return ApiError{404, "not_found", "no driver '" + driver_id + "'"}.to_response();
    return {200, to_json(*d).dump()};
  } catch (const std::exception& e) {
    return ApiError{500, "internal", e.what()}.to_response();
  }
}

Response ApiServer::get_outbox(const Params& p) const {
  try {
    std::optional<EventId> event_id;
    if (auto it = p.find("event_id"); it != p.end() && !it->second.empty()) {
      EventId v = 0;
      const auto& s = it->second;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ApiError{400, "bad_event_id", "event_id must be an integer"};
      event_id = v;
    }
    const auto records = outbox_.list(event_id);
    if (records.size() > opts_.max_rows) throw ApiError{413, "too_many_rows", "filter by event_id"};
    Json body = Json::array();
    for (const auto& r : records) body.push_back(to_json(r));
    return {200, body.dump()};
  } catch (const ApiError& e) {
    return e.to_response();
  } catch (const std::exception& e) {
    return ApiError{500, "internal", e.what()}.to_response();
  }
}

std::string ApiServer::sse_message(const FeedItem& item) {
  if (const auto* gap = std::get_if<FeedGap>(&item)) {
    Json j;
    j["dropped"] = gap->dropped;
    return "event: gap\ndata: " + j.dump() + "\n\n";
  }
  return "data: " + to_json(std::get<EventRecord>(item)).dump() + "\n\n";
}

std::uint16_t ApiServer::start() {
  http_ = std::make_unique<httplib::Server>();
  const int threads = opts_.threads;
  http_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  // The library default is SO_REUSEPORT, which lets a second server share the
  // port silently.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  auto params_of = [](const httplib::Request& req) {
    Params p;
    for (const auto& [k, v] : req.params) p.emplace(k, v);
    return p;
  };
  auto reply = [this](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };

  http_->set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", opts_.cors_origin);
  });
  http_->Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  http_->Get("/events", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_events(params_of(req)));
  });
  http_->Get("/analytics/speeds", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_speeds(params_of(req)));
  });
  http_->Get("/analytics/counts", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_counts(params_of(req)));
  });
  http_->Get(R"(/drivers/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_driver(req.matches[1].str()));
  });
  http_->Get("/outbox", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, get_outbox(params_of(req)));
  });

  http_->Get("/live", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = feed_.subscribe();
    {
      std::lock_guard lock(subs_mu_);
      live_subs_.insert(sub);
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub, first = true](std::size_t, httplib::DataSink& sink) mutable {
          if (first) {
            first = false;
            const std::string hello = ": connected\n\n";
            return sink.write(hello.data(), hello.size());
          }
          auto item = sub->pop(opts_.heartbeat);
          if (sub->closed()) return false;
          const std::string msg = item ? sse_message(*item) : std::string(": heartbeat\n\n");
          return sink.write(msg.data(), msg.size());
        },
        [this, sub](bool) {
          feed_.unsubscribe(sub);
          std::lock_guard lock(subs_mu_);
          live_subs_.erase(sub);
        });
  });

  http_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto r = ApiError{res.status, res.status == 404 ? "not_found" : "error",
                            httplib::status_message(res.status)}
                       .to_response();
    res.set_content(r.body, "application/json");
  });

  const int bound = opts_.port == 0 ? http_->bind_to_any_port(opts_.host)
                                    : (http_->bind_to_port(opts_.host, opts_.port) ? opts_.port : -1);
  if (bound < 0) {
    http_.reset();
    throw net::NetError("api: cannot listen on " + opts_.host + ":" + std::to_string(opts_.port));
  }
  port_ = static_cast<std::uint16_t>(bound);
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return port_;
}

void ApiServer::stop() {
  if (!http_) return;
  {
    std::lock_guard lock(subs_mu_);
    for (const auto& s : live_subs_) s->close();
  }
  http_->stop();
  if (thread_.joinable()) thread_.join();
  http_.reset();
}

}  // namespace crashnet::api
