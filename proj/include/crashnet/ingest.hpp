#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "crashnet/net.hpp"
#include "crashnet/store.hpp"

namespace crashnet {

/// Marks records a slow subscriber lost to buffer overflow.
struct FeedGap {
  std::uint64_t dropped = 0;
};

using FeedItem = std::variant<EventRecord, FeedGap>;

class LiveFeed;

/// One consumer's bounded queue. Overflow drops the oldest record and the
/// next pop reports the gap first.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  /// Empty optional on timeout or after close().
  std::optional<FeedItem> pop(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

 private:
  friend class LiveFeed;
  void push(const EventRecord& rec);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<EventRecord> items_;
  std::uint64_t dropped_ = 0;
  std::size_t capacity_;
  bool closed_ = false;
};

/// Fan-out of freshly persisted events to live subscribers.
class LiveFeed {
 public:
  static constexpr std::size_t kDefaultCapacity = 1024;

  std::shared_ptr<Subscription> subscribe(std::size_t capacity = kDefaultCapacity);
  void unsubscribe(const std::shared_ptr<Subscription>& sub);
  void publish(const EventRecord& rec);
  std::size_t subscriber_count() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::weak_ptr<Subscription>> subs_;
};

/// Outcome of one inbound line.
struct FrameOutcome {
  /// Bytes to send back (ack or error frame).
  std::string reply;
  bool close_connection = false;
  /// Set when the frame was valid and stored.
  std::optional<EventRecord> record;
  bool inserted = false;
};

struct IngestOptions {
  std::string host = "0.0.0.0";
  std::uint16_t port = 7080;
  /// One JSON line per accepted or rejected frame; null disables logging.
  std::function<void(const std::string&)> log;
  std::chrono::milliseconds idle_timeout{std::chrono::minutes(10)};
};

/// Accepts device connections (thread per connection), persists reports,
/// acks them, publishes fresh records and hands crashes to on_crash.
class IngestServer {
 public:
  IngestServer(EventStore& store, LiveFeed& feed, std::function<void(EventId)> on_crash,
               IngestOptions opts = {});
  ~IngestServer();
  IngestServer(const IngestServer&) = delete;
  IngestServer& operator=(const IngestServer&) = delete;

  /// Binds and starts accepting; returns the bound port.
  std::uint16_t start();
  void stop();
  std::uint16_t port() const { return port_; }

  /// Decodes and persists one line; the reply is the ack or error frame.
  FrameOutcome handle_frame(std::string_view line);
  /// After the reply went out: publish a fresh record and queue a crash.
  void complete_frame(const FrameOutcome& outcome);

  std::uint64_t frames_accepted() const { return accepted_; }
  std::uint64_t frames_rejected() const { return rejected_; }

 private:
  void accept_loop();
  void serve(std::shared_ptr<net::Socket> sock);
  void log_line(const std::string& line);

  EventStore& store_;
  LiveFeed& feed_;
  std::function<void(EventId)> on_crash_;
  IngestOptions opts_;

  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;

  std::mutex conn_mu_;
  std::condition_variable conn_cv_;
  std::list<std::shared_ptr<net::Socket>> conns_;

  std::atomic<std::uint64_t> accepted_{0};
  std::atomic<std::uint64_t> rejected_{0};
  std::mutex log_mu_;
};

}  // namespace crashnet
