#include "crashnet/dispatch.hpp"

#include <cmath>

#include "crashnet/util.hpp"

namespace crashnet {

const char* to_string(NotificationKind k) {
  switch (k) {
    case NotificationKind::voice_911: return "voice_911";
    case NotificationKind::voice_contact: return "voice_contact";
    case NotificationKind::sms_contact: return "sms_contact";
  }
  return "?";
}

const char* to_string(NotificationStatus s) {
  switch (s) {
    case NotificationStatus::pending: return "pending";
    case NotificationStatus::sent: return "sent";
    case NotificationStatus::failed: return "failed";
  }
  return "?";
}

namespace {

NotificationKind parse_kind(const std::string& s) {
  if (s == "voice_contact") return NotificationKind::voice_contact;
  if (s == "sms_contact") return NotificationKind::sms_contact;
  return NotificationKind::voice_911;
}

NotificationStatus parse_status(const std::string& s) {
  if (s == "sent") return NotificationStatus::sent;
  if (s == "failed") return NotificationStatus::failed;
  return NotificationStatus::pending;
}

constexpr const char* kOutboxSchema = R"sql(
CREATE TABLE IF NOT EXISTS notifications (
  notif_id INTEGER PRIMARY KEY AUTOINCREMENT,
  event_id INTEGER NOT NULL,
  kind TEXT NOT NULL,
  kind_order INTEGER NOT NULL,
  to_phone TEXT NOT NULL,
  message TEXT NOT NULL,
  status TEXT NOT NULL,
  attempts INTEGER NOT NULL,
  last_attempt_at INTEGER NOT NULL,
  reason TEXT NOT NULL,
  UNIQUE (event_id, kind)
);
)sql";

constexpr const char* kColumns =
    "notif_id, event_id, kind, to_phone, message, status, attempts, last_attempt_at, reason";

NotificationRecord read_record(const sql::Statement& st) {
  NotificationRecord r;
  r.notif_id = st.int64(0);
  r.event_id = st.int64(1);
  r.kind = parse_kind(st.text(2));
  r.to = st.text(3);
  r.message = st.text(4);
  r.status = parse_status(st.text(5));
  r.attempts = static_cast<int>(st.int64(6));
  r.last_attempt_at = st.int64(7);
  r.reason = st.text(8);
  return r;
}

}  // namespace

std::string compose_emergency_message(const EventRecord& event,
                                      const std::optional<DriverRecord>& driver,
                                      const std::string& address) {
  const std::string name = driver ? driver->name : kUnregisteredName;
  const std::string plate = driver ? driver->plate : kUnknownPlate;
  const std::string collision =
      event.report.collision ? to_string(*event.report.collision) : "unknown";
  return "Automated crash report. Driver: " + name + ". Location: " + address +
         ". Vehicle plate: " + plate + ". Collision type: " + collision +
         ". Last known speed: " + fixed(event.report.speed_kmh, 1) + " km/h.";
}

// ---------------------------------------------------------------------------

Outbox::Outbox(const EventStore& store) : path_(store.path()) {
  writer_ = std::make_unique<sql::Database>(path_);
  writer_->exec(kOutboxSchema);
}

std::vector<NotificationRecord> Outbox::ensure_records(
    EventId event_id, const std::vector<NotificationRecord>& plan) {
  {
    std::lock_guard lock(mu_);
    sql::Transaction tx(*writer_);
    auto st = writer_->prepare(
        "INSERT OR IGNORE INTO notifications (event_id, kind, kind_order, to_phone, message, "
        "status, attempts, last_attempt_at, reason) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)");
    for (const auto& r : plan) {
      st.reset();
      st.bind(1, event_id)
          .bind(2, std::string(to_string(r.kind)))
          .bind(3, static_cast<std::int64_t>(r.kind))
          .bind(4, r.to)
          .bind(5, r.message)
          .bind(6, std::string(to_string(r.status)))
          .bind(7, static_cast<std::int64_t>(r.attempts))
          .bind(8, r.last_attempt_at)
          .bind(9, r.reason);
      st.step();
    }
    tx.commit();
  }
  std::vector<NotificationRecord> out;
  sql::Database db(path_, true);
  auto st = db.prepare(std::string("SELECT ") + kColumns +
                       " FROM notifications WHERE event_id = ?1 ORDER BY kind_order");
  st.bind(1, event_id);
  while (st.step()) out.push_back(read_record(st));
  return out;
}

void Outbox::update(const NotificationRecord& rec) {
  std::lock_guard lock(mu_);
  auto st = writer_->prepare(
      "UPDATE notifications SET status = ?1, attempts = ?2, last_attempt_at = ?3, reason = ?4 "
      "WHERE notif_id = ?5");
  st.bind(1, std::string(to_string(rec.status)))
      .bind(2, static_cast<std::int64_t>(rec.attempts))
      .bind(3, rec.last_attempt_at)
      .bind(4, rec.reason)
      .bind(5, rec.notif_id);
  st.step();
}

std::vector<NotificationRecord> Outbox::list(std::optional<EventId> event_id) const {
  sql::Database db(path_, true);
  std::string text = std::string("SELECT ") + kColumns + " FROM notifications";
  if (event_id) text += " WHERE event_id = ?1";
  text += " ORDER BY notif_id";
  auto st = db.prepare(text);
  if (event_id) st.bind(1, *event_id);
  std::vector<NotificationRecord> out;
  while (st.step()) out.push_back(read_record(st));
  return out;
}

std::vector<EventId> Outbox::unfinished_crashes() const {
  sql::Database db(path_, true);
  auto st = db.prepare(
      "SELECT e.event_id FROM events e WHERE e.type = 'crash' AND ("
      " (SELECT COUNT(*) FROM notifications n WHERE n.event_id = e.event_id) < 3 OR"
      " EXISTS (SELECT 1 FROM notifications n WHERE n.event_id = e.event_id"
      "         AND n.status = 'pending')) ORDER BY e.event_id");
  std::vector<EventId> ids;
  while (st.step()) ids.push_back(st.int64(0));
  return ids;
}

// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
  const double ms = static_cast<double>(base.count()) * std::pow(factor, attempt - 1);
  return std::chrono::milliseconds(
      static_cast<std::int64_t>(std::min(ms, static_cast<double>(cap.count()))));
}

Dispatcher::Dispatcher(EventStore& store, Outbox& outbox, Geocoder& geocoder,
                       Telephony& telephony, DispatchOptions opts)
    : store_(store), outbox_(outbox), geocoder_(geocoder), telephony_(telephony),
      opts_(std::move(opts)) {
  if (opts_.retry.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

Dispatcher::~Dispatcher() { stop(); }

void Dispatcher::start() {
  std::lock_guard lock(mu_);
  if (!threads_.empty()) return;
  stopping_ = false;
  for (int i = 0; i < std::max(1, opts_.workers); ++i) threads_.emplace_back([this] { worker(); });
}

void Dispatcher::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
  threads_.clear();
}

void Dispatcher::enqueue(EventId event_id) {
  {
    std::lock_guard lock(mu_);
    if (!queued_or_running_.insert(event_id).second) return;
    queue_.push_back(event_id);
  }
  cv_.notify_one();
}

std::size_t Dispatcher::recover() {
  const auto ids = outbox_.unfinished_crashes();
  for (EventId id : ids) enqueue(id);
  return ids.size();
}

bool Dispatcher::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return idle_cv_.wait_for(lock, timeout, [this] { return queue_.empty() && running_ == 0; });
}

bool Dispatcher::sleep_for(std::chrono::milliseconds d) {
  std::unique_lock lock(mu_);
  return !cv_.wait_for(lock, d, [this] { return stopping_; });
}

void Dispatcher::worker() {
  for (;;) {
    EventId id = 0;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      ++running_;
    }
    try {
      dispatch_crash(id);
    } catch (const std::exception&) {
      // Left pending in the outbox; recover() picks it up on the next start.
    }
    if (on_dispatched) on_dispatched(id);
    {
      std::lock_guard lock(mu_);
      --running_;
      queued_or_running_.erase(id);
    }
    idle_cv_.notify_all();
  }
}

std::vector<NotificationRecord> Dispatcher::dispatch_crash(EventId event_id) {
  const auto event = store_.get_event(event_id);
  if (!event) throw std::invalid_argument("no event " + std::to_string(event_id));
  if (event->report.type != EventKind::crash)
    throw std::invalid_argument("event " + std::to_string(event_id) + " is not a crash");

  const auto driver = store_.get_driver(event->report.driver_id);
  const auto place = geocoder_.reverse_geocode(event->report.lat, event->report.lon);
  const std::string message = compose_emergency_message(*event, driver, place.address);

  std::vector<NotificationRecord> plan(3);
  plan[0].kind = NotificationKind::voice_911;
  plan[0].to = opts_.emergency_number;
  plan[1].kind = NotificationKind::voice_contact;
  plan[2].kind = NotificationKind::sms_contact;
  for (auto& r : plan) {
    r.event_id = event_id;
    r.message = message;
    if (r.kind == NotificationKind::voice_911) continue;
    if (driver && !driver->emergency_contact_phone.empty()) {
      r.to = driver->emergency_contact_phone;
    } else {
      r.status = NotificationStatus::failed;
      r.reason = kNoContactReason;
    }
  }

  for (auto rec : outbox_.ensure_records(event_id, plan)) {
    while (rec.status == NotificationStatus::pending) {
      ++rec.attempts;
      rec.last_attempt_at = now_ms();
      try {
        if (rec.kind == NotificationKind::sms_contact) telephony_.text(rec.to, rec.message);
        else telephony_.call(rec.to, rec.message);
        rec.status = NotificationStatus::sent;
        rec.reason.clear();
      } catch (const TelephonyError& e) {
        rec.reason = e.what();
        if (rec.attempts >= opts_.retry.max_attempts) rec.status = NotificationStatus::failed;
      }
      outbox_.update(rec);
      if (rec.status == NotificationStatus::pending &&
          !sleep_for(opts_.retry.delay_after(rec.attempts)))
        return outbox_.list(event_id);
    }
  }
  return outbox_.list(event_id);
}

}  // namespace crashnet
