#include "crashnet/server.hpp"

namespace crashnet {

std::unique_ptr<Geocoder> make_geocoder(const Config& cfg) {
  if (cfg.geocoder == GeocoderMode::external)
    return std::make_unique<HttpGeocoder>(cfg.geocoder_url);
  if (cfg.gazetteer_path.empty())
    return std::make_unique<GazetteerGeocoder>(std::vector<GazetteerEntry>{});
  return std::make_unique<GazetteerGeocoder>(GazetteerGeocoder::from_file(cfg.gazetteer_path));
}

std::unique_ptr<Telephony> make_telephony(const Config& cfg) {
  if (cfg.telephony == TelephonyMode::external)
    return std::make_unique<HttpTelephony>(cfg.telephony_url, cfg.telephony_token);
  return std::make_unique<MockTelephony>();
}

DispatchOptions dispatch_options(const Config& cfg) {
  DispatchOptions d;
  d.emergency_number = cfg.emergency_number;
  d.retry.max_attempts = cfg.retry_max_attempts;
  d.retry.base = std::chrono::milliseconds(cfg.retry_base_ms);
  d.retry.factor = cfg.retry_factor;
  d.retry.cap = std::chrono::milliseconds(cfg.retry_cap_ms);
  d.workers = cfg.dispatch_workers;
  return d;
}

namespace {

IngestOptions ingest_options(const Config& cfg, std::function<void(const std::string&)> log) {
  IngestOptions o;
  o.host = cfg.host;
  o.port = cfg.wire_port;
  o.log = std::move(log);
  return o;
}

api::ApiOptions api_options(const Config& cfg) {
  api::ApiOptions o;
  o.host = cfg.host;
  o.port = cfg.api_port;
  o.cors_origin = cfg.cors_origin;
  o.heartbeat = std::chrono::milliseconds(cfg.heartbeat_ms);
  return o;
}

}  // namespace

ServerStack::ServerStack(const Config& cfg, std::unique_ptr<Geocoder> geocoder,
                         std::unique_ptr<Telephony> telephony,
                         std::function<void(const std::string&)> log)
    : cfg_(cfg),
      store_(cfg.db_path),
      outbox_(store_),
      geocoder_(geocoder ? std::move(geocoder) : make_geocoder(cfg)),
      telephony_(telephony ? std::move(telephony) : make_telephony(cfg)),
      dispatcher_(store_, outbox_, *geocoder_, *telephony_, dispatch_options(cfg)),
      ingest_(store_, feed_, [this](EventId id) { dispatcher_.enqueue(id); },
              ingest_options(cfg, std::move(log))),
      api_(store_, outbox_, feed_, api_options(cfg)) {}

ServerStack::~ServerStack() { stop(); }

void ServerStack::start() {
  dispatcher_.start();
  dispatcher_.recover();
  try {
    ingest_.start();
    api_.start();
  } catch (...) {
    ingest_.stop();
    dispatcher_.stop();
    throw;
  }
  started_ = true;
}

void ServerStack::stop() {
  if (!started_) return;
  started_ = false;
  ingest_.stop();
  api_.stop();
  dispatcher_.stop();
}

}  // namespace crashnet
