#include "crashnet/ingest.hpp"

#include <algorithm>

#include <json.hpp>

#include "crashnet/util.hpp"
#include "crashnet/wire.hpp"

namespace crashnet {

std::optional<FeedItem> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [this] { return closed_ || dropped_ > 0 || !items_.empty(); });
  if (closed_) return std::nullopt;
  if (dropped_ > 0) {
    FeedGap gap{dropped_};
    dropped_ = 0;
    return gap;
  }
  if (items_.empty()) return std::nullopt;
  EventRecord rec = std::move(items_.front());
  items_.pop_front();
  return rec;
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

void Subscription::push(const EventRecord& rec) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    if (items_.size() >= capacity_) {
      items_.pop_front();
      ++dropped_;
    }
    items_.push_back(rec);
  }
  cv_.notify_one();
}

std::shared_ptr<Subscription> LiveFeed::subscribe(std::size_t capacity) {
  auto sub = std::make_shared<Subscription>(std::max<std::size_t>(1, capacity));
  std::lock_guard lock(mu_);
  subs_.push_back(sub);
  return sub;
}

void LiveFeed::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  sub->close();
  std::lock_guard lock(mu_);
  std::erase_if(subs_, [&](const auto& w) {
    auto s = w.lock();
    return !s || s == sub;
  });
}

void LiveFeed::publish(const EventRecord& rec) {
  // Held across the fan-out so concurrent producers deliver in one order.
  std::lock_guard lock(mu_);
  std::erase_if(subs_, [](const auto& w) {
    auto s = w.lock();
    return !s || s->closed();
  });
  for (const auto& w : subs_)
    if (auto s = w.lock()) s->push(rec);
}

std::size_t LiveFeed::subscriber_count() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(subs_.begin(), subs_.end(), [](const auto& w) {
    auto s = w.lock();
    return s && !s->closed();
  }));
}

// ---------------------------------------------------------------------------

IngestServer::IngestServer(EventStore& store, LiveFeed& feed,
                           std::function<void(EventId)> on_crash, IngestOptions opts)
    : store_(store), feed_(feed), on_crash_(std::move(on_crash)), opts_(std::move(opts)) {}

IngestServer::~IngestServer() { stop(); }

std::uint16_t IngestServer::start() {
  listener_ = net::listen_tcp(opts_.host, opts_.port);
  port_ = net::local_port(listener_);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void IngestServer::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  std::unique_lock lock(conn_mu_);
  for (auto& s : conns_) s->shutdown();
  conn_cv_.wait(lock, [this] { return conns_.empty(); });
}

void IngestServer::accept_loop() {
  while (running_) {
    std::optional<net::Socket> client;
    try {
      client = net::accept_with_timeout(listener_, std::chrono::milliseconds(100));
    } catch (const net::NetError&) {
      return;
    }
    if (!client) continue;
    auto sock = std::make_shared<net::Socket>(std::move(*client));
    {
      std::lock_guard lock(conn_mu_);
      if (!running_) return;
      conns_.push_back(sock);
    }
    std::thread([this, sock] { serve(sock); }).detach();
  }
}

void IngestServer::serve(std::shared_ptr<net::Socket> sock) {
  wire::FrameSplitter splitter;
  try {
    bool open = true;
    while (open && running_) {
      auto chunk = sock->read_some(opts_.idle_timeout);
      if (!chunk || chunk->empty()) break;
      splitter.feed(*chunk);
      for (;;) {
        std::optional<std::string> line;
        try {
          line = splitter.next();
        } catch (const wire::ParseError&) {
          sock->write_all(wire::encode_error("frame", std::nullopt));
          open = false;
          break;
        }
        if (!line) break;
        if (trim(*line).empty()) continue;
        FrameOutcome out = handle_frame(*line);
        if (!out.reply.empty()) sock->write_all(out.reply);
        complete_frame(out);
        if (out.close_connection) {
          open = false;
          break;
        }
      }
    }
  } catch (const std::exception&) {
  }
  sock->shutdown();
  std::lock_guard lock(conn_mu_);
  conns_.remove(sock);
  conn_cv_.notify_all();
}

void IngestServer::log_line(const std::string& line) {
  if (!opts_.log) return;
  std::lock_guard lock(log_mu_);
  opts_.log(line);
}

FrameOutcome IngestServer::handle_frame(std::string_view line) {
  using nlohmann::json;
  FrameOutcome out;
  wire::EventReport report;
  try {
    report = wire::decode_report(line);
  } catch (const wire::ParseError& e) {
    ++rejected_;
    out.reply = wire::encode_error("frame", std::nullopt);
    log_line(json{{"ts", now_ms()}, {"status", "rejected"}, {"err", "frame"},
                  {"detail", e.what()}}.dump());
    return out;
  } catch (const wire::ValidationError& e) {
    ++rejected_;
    const auto seq = wire::peek_seq(line);
    out.reply = wire::encode_error(e.field(), seq);
    out.close_connection = dynamic_cast<const wire::VersionError*>(&e) != nullptr;
    json entry{{"ts", now_ms()}, {"status", "rejected"}, {"err", e.field()}, {"detail", e.what()}};
    entry["seq"] = seq ? json(*seq) : json(nullptr);
    log_line(entry.dump());
    return out;
  }

  InsertResult ins;
  const TimestampMs received_at = now_ms();
  try {
    ins = store_.insert_event(report, received_at);
  } catch (const std::exception& e) {
    // No ack: the device keeps the entry and redelivers.
    ++rejected_;
    out.close_connection = true;
    log_line(json{{"ts", now_ms()}, {"status", "store_error"}, {"seq", report.seq},
                  {"driver_id", report.driver_id}, {"detail", e.what()}}.dump());
    return out;
  }
  ++accepted_;
  out.reply = wire::encode_ack(report.seq);
  out.inserted = ins.inserted;
  out.record = EventRecord{ins.event_id, received_at, report, ins.flagged_unknown_driver};
  log_line(json{{"ts", now_ms()},
                {"status", ins.inserted ? "accepted" : "duplicate"},
                {"event_id", ins.event_id},
                {"driver_id", report.driver_id},
                {"seq", report.seq},
                {"type", to_string(report.type)},
                {"flagged_unknown_driver", ins.flagged_unknown_driver}}
               .dump());
  return out;
}

void IngestServer::complete_frame(const FrameOutcome& outcome) {
  if (!outcome.inserted || !outcome.record) return;
  feed_.publish(*outcome.record);
  if (outcome.record->report.type == EventKind::crash && on_crash_)
    on_crash_(outcome.record->event_id);
}

}  // namespace crashnet
