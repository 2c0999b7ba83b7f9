#include <doctest.h>

#include <random>
#include <thread>

#include <httplib.h>

#include "crashnet/api.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace crashnet;
using namespace crashnet::api;

namespace {

constexpr TimestampMs kNow = 1'700'000'000'000;

struct Fixture {
  support::TempDir dir;
  EventStore store{dir / "db"};
  Outbox outbox{store};
  LiveFeed feed;
  ApiServer api{store, outbox, feed,
                {.host = "127.0.0.1", .port = 0, .heartbeat = std::chrono::milliseconds(200),
                 .clock = [] { return kNow; }}};
  std::vector<EventRecord> all;

  void add(std::uint64_t seq, EventKind type, TimestampMs t, double speed) {
    wire::EventReport r;
    r.seq = seq;
    r.driver_id = "d";
    r.type = type;
    r.t = t;
    r.speed_kmh = speed;
    if (type == EventKind::crash) {
      r.max_axis = Axis::x;
      r.g_force = 13;
      r.collision = Collision::head_on;
    } else {
      r.g_force = 4;
    }
    const auto res = store.insert_event(r, 0);
    all.push_back({res.event_id, 0, r, true});
  }
};

Json parse(const Response& r) { return Json::parse(r.body); }

std::string dump_events(const std::vector<EventRecord>& v) {
  Json a = Json::array();
  for (const auto& r : v) a.push_back(to_json(r));
  return a.dump();
}

std::string dump_counts(const std::vector<TimeBucketCount>& v) {
  Json a = Json::array();
  for (const auto& b : v) a.push_back(to_json(b));
  return a.dump();
}

}  // namespace

TEST_SUITE("api") {

TEST_CASE("timestamps and buckets") {
  CHECK(parse_timestamp("0") == 0);
  CHECK(parse_timestamp("1700000000000") == 1700000000000);
  CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_timestamp("2023-11-14T22:13:20Z") == 1700000000000);
  CHECK(parse_timestamp("2023-11-14T22:13:20.5Z") == 1700000000500);
  CHECK(parse_timestamp("2023-11-15T00:13:20+02:00") == 1700000000000);
  CHECK_FALSE(parse_timestamp("yesterday"));
  CHECK_FALSE(parse_timestamp("2023-13-01T00:00:00Z"));
  CHECK_FALSE(parse_timestamp("2023-11-14T22:13:20"));
  CHECK(bucket_ms("hour") == kHourMs);
  CHECK(bucket_ms("week") == kWeekMs);
  CHECK_FALSE(bucket_ms("fortnight"));
}

TEST_CASE("handler basics") {
  Fixture f;
  CHECK(f.api.get_events({}).body == "[]");
  const auto bad = f.api.get_events({{"from", "10"}, {"to", "5"}});
  CHECK(bad.status == 400);
  CHECK(parse(bad)["code"] == "bad_range");
  CHECK(f.api.get_events({{"from", "x"}}).status == 400);
  CHECK(parse(f.api.get_events({{"type", "meteor"}}))["code"] == "bad_type");
  CHECK(parse(f.api.get_counts({{"bucket", "fortnight"}}))["code"] == "bad_bucket");
  CHECK(f.api.get_counts({{"bucket", "fortnight"}}).status == 400);

  const auto empty = parse(f.api.get_speeds({}));
  CHECK(empty.dump() == R"({"count":0,"mean":null,"max":null,"rows":[]})");

  // Default window: the last 24 hours, bucketed by hour.
  const auto counts = parse(f.api.get_counts({}));
  CHECK(counts.size() == 24);
  CHECK(counts[0]["bucket_start"] == kNow - kDayMs);
  CHECK(counts[0]["crashes"] == 0);

  CHECK(f.api.get_driver("nobody").status == 404);
  CHECK(f.api.get_outbox({}).body == "[]");
  CHECK(f.api.get_outbox({{"event_id", "abc"}}).status == 400);
}

TEST_CASE("speeds and counts examples") {
  Fixture f;
  f.add(1, EventKind::crash, kNow - 5000, 40);
  f.add(2, EventKind::crash, kNow - 4000, 60);
  f.add(3, EventKind::pothole, kNow - 3000, 99);
  const auto s = parse(f.api.get_speeds({}));
  CHECK(s["count"] == 2);
  CHECK(s["mean"] == 50.0);
  CHECK(s["max"] == 60.0);
  CHECK(parse(f.api.get_speeds({{"from", std::to_string(kNow - 3500)}}))["count"] == 0);

  f.add(4, EventKind::pothole, kNow - kDayMs - 1000, 10);
  const auto two_days = parse(f.api.get_counts(
      {{"from", std::to_string(kNow - 2 * kDayMs)}, {"to", std::to_string(kNow)}, {"bucket", "day"}}));
  REQUIRE(two_days.size() == 2);
  CHECK(two_days[0]["potholes"] == 1);
  CHECK(two_days[1]["crashes"] == 2);
  CHECK(two_days[1]["potholes"] == 1);
}

TEST_CASE("row cap") {
  Fixture f;
  ApiServer small(f.store, f.outbox, f.feed, {.max_rows = 2, .clock = [] { return kNow; }});
  for (std::uint64_t i = 1; i <= 3; ++i) f.add(i, EventKind::crash, kNow - 100, 1);
  CHECK(small.get_events({}).status == 413);
  CHECK(small.get_speeds({}).status == 413);
  CHECK(small.get_events({{"from", std::to_string(kNow - 50)}}).status == 200);
}

TEST_CASE("handlers match the naive scan on random stores") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 3; ++round) {
    Fixture f;
    const int n = 1 + static_cast<int>(rng() % 300);
    for (int i = 0; i < n; ++i)
      f.add(static_cast<std::uint64_t>(i + 1), rng() % 2 ? EventKind::crash : EventKind::pothole,
            kNow - static_cast<TimestampMs>(rng() % (3 * kDayMs)),
            static_cast<double>(rng() % 15000) / 100.0);
    const char* buckets[] = {"hour", "day", "week"};
    for (int q = 0; q < 20; ++q) {
      TimestampMs a = kNow - static_cast<TimestampMs>(rng() % (3 * kDayMs));
      TimestampMs b = kNow - static_cast<TimestampMs>(rng() % (3 * kDayMs));
      if (a > b) std::swap(a, b);
      const Params p{{"from", std::to_string(a)}, {"to", std::to_string(b)}};
      CHECK(f.api.get_events(p).body == dump_events(oracle::scan_events(f.all, a, b, std::nullopt)));
      auto pc = p;
      pc["type"] = "crash";
      CHECK(f.api.get_events(pc).body ==
            dump_events(oracle::scan_events(f.all, a, b, EventKind::crash)));
      CHECK(f.api.get_speeds(p).body == to_json(oracle::scan_speeds(f.all, a, b)).dump());
      auto pb = p;
      pb["bucket"] = buckets[q % 3];
      CHECK(f.api.get_counts(pb).body ==
            dump_counts(oracle::scan_counts(f.all, a, b, *bucket_ms(buckets[q % 3]))));
      // Same state, same parameters, same bytes.
      CHECK(f.api.get_events(p).body == f.api.get_events(p).body);
    }
  }
}

TEST_CASE("HTTP surface") {
  Fixture f;
  f.store.upsert_driver({"d", "Ann", "Civic", "P-1", "Bob", "+1"});
  f.add(1, EventKind::crash, kNow - 100, 42);
  const auto port = f.api.start();
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/events");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "application/json");
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  CHECK(Json::parse(res->body).size() == 1);

  res = cli.Get("/events?from=9&to=1");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(Json::parse(res->body)["code"] == "bad_range");

  res = cli.Get("/drivers/d");
  REQUIRE(res);
  CHECK(Json::parse(res->body)["plate"] == "P-1");
  res = cli.Get("/analytics/speeds");
  REQUIRE(res);
  CHECK(Json::parse(res->body)["count"] == 1);
  res = cli.Get("/analytics/counts?bucket=day");
  REQUIRE(res);
  CHECK(Json::parse(res->body).size() == 1);
  res = cli.Get("/outbox?event_id=1");
  REQUIRE(res);
  CHECK(res->body == "[]");
  res = cli.Get("/nowhere");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(Json::parse(res->body)["code"] == "not_found");
  res = cli.Options("/events");
  REQUIRE(res);
  CHECK(res->status == 204);
  f.api.stop();
}

TEST_CASE("live stream delivers records published after subscribing") {
  Fixture f;
  const auto port = f.api.start();

  auto collect = [&](std::string& out, std::atomic<bool>& done) {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(std::chrono::seconds(5));
    cli.Get("/live", [&](const char* data, std::size_t len) {
      out.append(data, len);
      return out.find("\"seq\":2") == std::string::npos;
    });
    done = true;
  };
  std::string a, b;
  std::atomic<bool> da{false}, db{false};
  std::thread ta(collect, std::ref(a), std::ref(da));
  std::thread tb(collect, std::ref(b), std::ref(db));
  for (int i = 0; i < 100 && f.feed.subscriber_count() < 2; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(f.feed.subscriber_count() == 2);

  EventRecord r;
  r.event_id = 1;
  r.report.driver_id = "d";
  r.report.seq = 2;
  f.feed.publish(r);
  ta.join();
  tb.join();
  for (const auto* s : {&a, &b}) {
    CHECK(s->find("data: {\"event_id\":1,") != std::string::npos);
    CHECK(std::count(s->begin(), s->end(), '\n') >= 2);
  }
  // Disconnected clients are unsubscribed.
  for (int i = 0; i < 200 && f.feed.subscriber_count() > 0; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  CHECK(f.feed.subscriber_count() == 0);
  f.api.stop();
}

TEST_CASE("heartbeat and gap messages") {
  CHECK(ApiServer::sse_message(FeedItem{FeedGap{3}}) == "event: gap\ndata: {\"dropped\":3}\n\n");
  Fixture f;
  const auto port = f.api.start();
  std::string got;
  httplib::Client cli("127.0.0.1", port);
  cli.Get("/live", [&](const char* data, std::size_t len) {
    got.append(data, len);
    return got.find(": heartbeat") == std::string::npos;
  });
  CHECK(got.find(": heartbeat\n\n") != std::string::npos);
  f.api.stop();
}

}  // TEST_SUITE
