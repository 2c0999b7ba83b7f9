#pragma once

#include <functional>
#include <memory>
#include <string>

#include "crashnet/api.hpp"
#include "crashnet/config.hpp"
#include "crashnet/dispatch.hpp"
#include "crashnet/geocode.hpp"
#include "crashnet/ingest.hpp"
#include "crashnet/store.hpp"
#include "crashnet/telephony.hpp"

namespace crashnet {

std::unique_ptr<Geocoder> make_geocoder(const Config& cfg);
std::unique_ptr<Telephony> make_telephony(const Config& cfg);
DispatchOptions dispatch_options(const Config& cfg);

/// Ingestion, dispatch and the query API over one database.
class ServerStack {
 public:
  /// Null geocoder/telephony are built from cfg.
  explicit ServerStack(const Config& cfg, std::unique_ptr<Geocoder> geocoder = nullptr,
                       std::unique_ptr<Telephony> telephony = nullptr,
                       std::function<void(const std::string&)> log = nullptr);
  ~ServerStack();
  ServerStack(const ServerStack&) = delete;
  ServerStack& operator=(const ServerStack&) = delete;

  /// Re-queues unfinished crashes, then starts workers and both listeners.
  /// Throws net::NetError when a port is taken.
  void start();
  void stop();

  std::uint16_t wire_port() const { return ingest_.port(); }
  std::uint16_t api_port() const { return api_.port(); }

  EventStore& store() { return store_; }
  Outbox& outbox() { return outbox_; }
  LiveFeed& feed() { return feed_; }
  Dispatcher& dispatcher() { return dispatcher_; }
  IngestServer& ingest() { return ingest_; }
  api::ApiServer& api() { return api_; }
  Telephony& telephony() { return *telephony_; }

 private:
  Config cfg_;
  EventStore store_;
  Outbox outbox_;
  LiveFeed feed_;
  std::unique_ptr<Geocoder> geocoder_;
  std::unique_ptr<Telephony> telephony_;
  Dispatcher dispatcher_;
  IngestServer ingest_;
  api::ApiServer api_;
  bool started_ = false;
};

}  // namespace crashnet
