#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "crashnet/geocode.hpp"
#include "crashnet/store.hpp"
#include "crashnet/telephony.hpp"

namespace crashnet {

enum class NotificationKind { voice_911, voice_contact, sms_contact };
enum class NotificationStatus { pending, sent, failed };

const char* to_string(NotificationKind k);
const char* to_string(NotificationStatus s);

struct NotificationRecord {
  std::int64_t notif_id = 0;
  EventId event_id = 0;
  NotificationKind kind = NotificationKind::voice_911;
  std::string to;
  std::string message;
  NotificationStatus status = NotificationStatus::pending;
  int attempts = 0;
  TimestampMs last_attempt_at = 0;
  /// Why the last attempt failed; empty once sent.
  std::string reason;
};

inline constexpr const char* kNoContactReason = "no contact on file";
inline constexpr const char* kUnregisteredName = "unregistered driver";
inline constexpr const char* kUnknownPlate = "unknown";

/// The text read to 911 and sent to the emergency contact.
std::string compose_emergency_message(const EventRecord& event,
                                      const std::optional<DriverRecord>& driver,
                                      const std::string& address);

/// Notification table, living next to the events table. Each (event_id,
/// kind) exists at most once.
class Outbox {
 public:
  explicit Outbox(const EventStore& store);

  /// Inserts the planned records that do not exist yet and returns all
  /// records for the event in kind order.
  std::vector<NotificationRecord> ensure_records(EventId event_id,
                                                 const std::vector<NotificationRecord>& plan);
  void update(const NotificationRecord& rec);

  /// All records (or one event's), ascending notif_id.
  std::vector<NotificationRecord> list(std::optional<EventId> event_id = std::nullopt) const;

  /// Crash events whose fan-out is missing or still has pending records.
  std::vector<EventId> unfinished_crashes() const;

 private:
  std::filesystem::path path_;
  std::unique_ptr<sql::Database> writer_;
  mutable std::mutex mu_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  std::chrono::milliseconds cap{30000};

  /// Wait after the given failed attempt (1-based).
  std::chrono::milliseconds delay_after(int attempt) const;
};

struct DispatchOptions {
  /// Stand-in for 911; real emergency numbers need an explicit override.
  std::string emergency_number = "+15555550911";
  RetryPolicy retry;
  int workers = 2;
};

/// Crash fan-out: one 911 call, one call and one text to the emergency
/// contact. Jobs run on worker threads; one event is never handled by two
/// workers at once.
class Dispatcher {
 public:
  Dispatcher(EventStore& store, Outbox& outbox, Geocoder& geocoder, Telephony& telephony,
             DispatchOptions opts = {});
  ~Dispatcher();
  Dispatcher(const Dispatcher&) = delete;
  Dispatcher& operator=(const Dispatcher&) = delete;

  void start();
  void stop();

  void enqueue(EventId event_id);
  /// Re-queues crashes left unfinished by an earlier run; returns how many.
  std::size_t recover();

  /// Synchronous fan-out for one crash.
  std::vector<NotificationRecord> dispatch_crash(EventId event_id);

  /// True once the queue is empty and no job is running.
  bool wait_idle(std::chrono::milliseconds timeout);

  /// Runs after each completed fan-out (worker thread).
  std::function<void(EventId)> on_dispatched;

 private:
  void worker();
  /// False when stop() interrupted the wait.
  bool sleep_for(std::chrono::milliseconds d);

  EventStore& store_;
  Outbox& outbox_;
  Geocoder& geocoder_;
  Telephony& telephony_;
  DispatchOptions opts_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<EventId> queue_;
  std::set<EventId> queued_or_running_;
  int running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

}  // namespace crashnet
