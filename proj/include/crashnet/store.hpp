#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crashnet/wire.hpp"

struct sqlite3;
struct sqlite3_stmt;

namespace crashnet {

using EventId = std::int64_t;

/// Retriable storage failure.
struct StoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller passed from > to (or a non-positive bucket).
struct RangeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace sql {

class Statement;

/// Owning sqlite3 connection.
class Database {
 public:
  Database(const std::filesystem::path& path, bool read_only = false);
  ~Database();
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  void exec(const std::string& sql);
  Statement prepare(const std::string& sql);
  std::int64_t last_insert_rowid() const;
  int changes() const;
  sqlite3* handle() const { return db_; }

 private:
  sqlite3* db_ = nullptr;
};

class Statement {
 public:
  Statement(sqlite3* db, const std::string& sql);
  ~Statement();
  Statement(Statement&& o) noexcept : db_(o.db_), stmt_(o.stmt_) { o.stmt_ = nullptr; }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int idx, std::int64_t v);
  Statement& bind(int idx, double v);
  Statement& bind(int idx, const std::string& v);
  Statement& bind_null(int idx);

  /// True while a row is available.
  bool step();
  void reset();

  std::int64_t int64(int col) const;
  double real(int col) const;
  std::string text(int col) const;
  bool is_null(int col) const;

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

/// BEGIN IMMEDIATE ... COMMIT, rolled back unless commit() ran.
class Transaction {
 public:
  explicit Transaction(Database& db);
  ~Transaction();
  void commit();

 private:
  Database& db_;
  bool done_ = false;
};

}  // namespace sql

struct DriverRecord {
  std::string driver_id;
  std::string name;
  std::string car;
  std::string plate;
  std::string emergency_contact_name;
  std::string emergency_contact_phone;

  bool operator==(const DriverRecord&) const = default;
};

struct EventRecord {
  EventId event_id = 0;
  TimestampMs received_at = 0;
  wire::EventReport report;
  bool flagged_unknown_driver = false;

  bool operator==(const EventRecord&) const = default;
};

struct InsertResult {
  EventId event_id = 0;
  /// False when (driver_id, seq) was already stored.
  bool inserted = false;
  bool flagged_unknown_driver = false;
};

struct SpeedRow {
  EventId event_id = 0;
  TimestampMs t = 0;
  double speed_kmh = 0.0;

  bool operator==(const SpeedRow&) const = default;
};

struct SpeedStats {
  std::vector<SpeedRow> rows;
  std::uint64_t count = 0;
  /// Null when count is 0.
  std::optional<double> mean;
  std::optional<double> max;

  bool operator==(const SpeedStats&) const = default;
};

struct TimeBucketCount {
  TimestampMs bucket_start = 0;
  std::uint64_t crashes = 0;
  std::uint64_t potholes = 0;

  bool operator==(const TimeBucketCount&) const = default;
};

/// The events and drivers tables. One writer at a time (serialized
/// internally); each read opens its own connection and sees committed rows
/// only.
class EventStore {
 public:
  explicit EventStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  /// Durable before return; idempotent on (driver_id, seq). Unknown drivers
  /// are stored and flagged.
  InsertResult insert_event(const wire::EventReport& report, TimestampMs received_at);

  void upsert_driver(const DriverRecord& d);
  std::optional<DriverRecord> get_driver(const std::string& driver_id) const;

  std::optional<EventRecord> get_event(EventId id) const;

  /// Rows with from <= t < to, ascending t then event_id.
  std::vector<EventRecord> query_events(TimestampMs from, TimestampMs to,
                                        std::optional<EventKind> type = std::nullopt) const;
  std::uint64_t count_events(TimestampMs from, TimestampMs to,
                             std::optional<EventKind> type = std::nullopt) const;

  /// Crashes in [from, to); mean is summed in (t, event_id) order.
  SpeedStats speed_stats(TimestampMs from, TimestampMs to) const;

  /// Buckets aligned to from, covering [from, to); the last may be partial.
  std::vector<TimeBucketCount> counts_by_bucket(TimestampMs from, TimestampMs to,
                                                std::int64_t bucket_ms) const;

  std::uint64_t total_events() const;
  /// Crash event ids, ascending.
  std::vector<EventId> crash_event_ids() const;

 private:
  std::filesystem::path path_;
  std::unique_ptr<sql::Database> writer_;
  mutable std::mutex write_mu_;
};

struct ImportResult {
  std::uint64_t imported = 0;
  std::uint64_t skipped = 0;
};

inline constexpr const char* kDriversCsvHeader =
    "driver_id,name,car,plate,contact_name,contact_phone";

/// Bulk upsert from the drivers CSV. A wrong header throws; malformed rows
/// are skipped with a warning line on `warn`.
ImportResult import_drivers_csv(std::istream& in, EventStore& store, std::ostream& warn);

}  // namespace crashnet
