#include "crashnet/store.hpp"

#include <sqlite3.h>

#include <istream>
#include <ostream>

#include "crashnet/util.hpp"

namespace crashnet {

namespace sql {

Database::Database(const std::filesystem::path& path, bool read_only) {
  const int flags = read_only ? SQLITE_OPEN_READONLY
                              : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
  if (sqlite3_open_v2(path.c_str(), &db_, flags | SQLITE_OPEN_FULLMUTEX, nullptr) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw StoreError("open " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 10000);
}

Database::~Database() {
  if (db_) sqlite3_close_v2(db_);
}

void Database::exec(const std::string& text) {
  char* err = nullptr;
  if (sqlite3_exec(db_, text.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw StoreError(msg + " [" + text + "]");
  }
}

Statement Database::prepare(const std::string& text) { return Statement(db_, text); }

std::int64_t Database::last_insert_rowid() const { return sqlite3_last_insert_rowid(db_); }

int Database::changes() const { return sqlite3_changes(db_); }

Statement::Statement(sqlite3* db, const std::string& text) : db_(db) {
  if (sqlite3_prepare_v2(db, text.c_str(), -1, &stmt_, nullptr) != SQLITE_OK)
    throw StoreError(std::string("prepare: ") + sqlite3_errmsg(db) + " [" + text + "]");
}

Statement::~Statement() {
  if (stmt_) sqlite3_finalize(stmt_);
}

Statement& Statement::bind(int idx, std::int64_t v) {
  sqlite3_bind_int64(stmt_, idx, v);
  return *this;
}

Statement& Statement::bind(int idx, double v) {
  sqlite3_bind_double(stmt_, idx, v);
  return *this;
}

Statement& Statement::bind(int idx, const std::string& v) {
  sqlite3_bind_text(stmt_, idx, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
  return *this;
}

Statement& Statement::bind_null(int idx) {
  sqlite3_bind_null(stmt_, idx);
  return *this;
}

bool Statement::step() {
  const int rc = sqlite3_step(stmt_);
  if (rc == SQLITE_ROW) return true;
  if (rc == SQLITE_DONE) return false;
  throw StoreError(std::string("step: ") + sqlite3_errmsg(db_));
}

void Statement::reset() {
  sqlite3_reset(stmt_);
  sqlite3_clear_bindings(stmt_);
}

std::int64_t Statement::int64(int col) const { return sqlite3_column_int64(stmt_, col); }
double Statement::real(int col) const { return sqlite3_column_double(stmt_, col); }
bool Statement::is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }

std::string Statement::text(int col) const {
  const auto* p = sqlite3_column_text(stmt_, col);
  return p ? std::string(reinterpret_cast<const char*>(p),
                         static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
           : std::string();
}

Transaction::Transaction(Database& db) : db_(db) { db_.exec("BEGIN IMMEDIATE"); }

Transaction::~Transaction() {
  if (!done_) {
    try {
      db_.exec("ROLLBACK");
    } catch (...) {
    }
  }
}

void Transaction::commit() {
  db_.exec("COMMIT");
  done_ = true;
}

}  // namespace sql

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS drivers (
  driver_id TEXT PRIMARY KEY,
  name TEXT NOT NULL,
  car TEXT NOT NULL,
  plate TEXT NOT NULL,
  contact_name TEXT NOT NULL,
  contact_phone TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS events (
  event_id INTEGER PRIMARY KEY AUTOINCREMENT,
  received_at INTEGER NOT NULL,
  v INTEGER NOT NULL,
  seq INTEGER NOT NULL,
  driver_id TEXT NOT NULL,
  type TEXT NOT NULL,
  t INTEGER NOT NULL,
  lat REAL NOT NULL,
  lon REAL NOT NULL,
  speed_kmh REAL NOT NULL,
  max_axis TEXT NOT NULL,
  g_force REAL NOT NULL,
  magnitude_pct REAL NOT NULL,
  collision TEXT,
  flagged_unknown_driver INTEGER NOT NULL,
  UNIQUE (driver_id, seq)
);
CREATE INDEX IF NOT EXISTS events_by_t ON events (t, event_id);
)sql";

constexpr const char* kEventColumns =
    "event_id, received_at, v, seq, driver_id, type, t, lat, lon, speed_kmh, max_axis, g_force, "
    "magnitude_pct, collision, flagged_unknown_driver";

EventRecord read_event(const sql::Statement& st) {
  EventRecord r;
  r.event_id = st.int64(0);
  r.received_at = st.int64(1);
  r.report.v = static_cast<int>(st.int64(2));
  r.report.seq = static_cast<std::uint64_t>(st.int64(3));
  r.report.driver_id = st.text(4);
  r.report.type = parse_event_kind(st.text(5)).value_or(EventKind::pothole);
  r.report.t = st.int64(6);
  r.report.lat = st.real(7);
  r.report.lon = st.real(8);
  r.report.speed_kmh = st.real(9);
  r.report.max_axis = parse_axis(st.text(10)).value_or(Axis::z);
  r.report.g_force = st.real(11);
  r.report.magnitude_pct = st.real(12);
  if (!st.is_null(13)) r.report.collision = parse_collision(st.text(13));
  r.flagged_unknown_driver = st.int64(14) != 0;
  return r;
}

void check_range(TimestampMs from, TimestampMs to) {
  if (from > to) throw RangeError("from must be <= to");
}

}  // namespace

EventStore::EventStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  writer_ = std::make_unique<sql::Database>(path_);
  writer_->exec("PRAGMA journal_mode=WAL");
  writer_->exec("PRAGMA synchronous=FULL");
  writer_->exec(kSchema);
}

InsertResult EventStore::insert_event(const wire::EventReport& r, TimestampMs received_at) {
  std::lock_guard lock(write_mu_);
  sql::Transaction tx(*writer_);

  InsertResult result;
  {
    auto st = writer_->prepare("SELECT event_id, flagged_unknown_driver FROM events "
                               "WHERE driver_id = ?1 AND seq = ?2");
    st.bind(1, r.driver_id).bind(2, static_cast<std::int64_t>(r.seq));
    if (st.step()) {
      result.event_id = st.int64(0);
      result.flagged_unknown_driver = st.int64(1) != 0;
      return result;  // rollback of an empty transaction
    }
  }
  {
    auto st = writer_->prepare("SELECT 1 FROM drivers WHERE driver_id = ?1");
    st.bind(1, r.driver_id);
    result.flagged_unknown_driver = !st.step();
  }
  auto st = writer_->prepare(
      "INSERT INTO events (received_at, v, seq, driver_id, type, t, lat, lon, speed_kmh, "
      "max_axis, g_force, magnitude_pct, collision, flagged_unknown_driver) "
      "VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14)");
  st.bind(1, received_at)
      .bind(2, static_cast<std::int64_t>(r.v))
      .bind(3, static_cast<std::int64_t>(r.seq))
      .bind(4, r.driver_id)
      .bind(5, std::string(to_string(r.type)))
      .bind(6, r.t)
      .bind(7, r.lat)
      .bind(8, r.lon)
      .bind(9, r.speed_kmh)
      .bind(10, std::string(to_string(r.max_axis)))
      .bind(11, r.g_force)
      .bind(12, r.magnitude_pct);
  if (r.collision) st.bind(13, std::string(to_string(*r.collision)));
  else st.bind_null(13);
  st.bind(14, static_cast<std::int64_t>(result.flagged_unknown_driver));
  st.step();
  result.event_id = writer_->last_insert_rowid();
  result.inserted = true;
  tx.commit();
  return result;
}

void EventStore::upsert_driver(const DriverRecord& d) {
  if (d.driver_id.empty()) throw std::invalid_argument("driver_id must be non-empty");
  if (d.emergency_contact_phone.empty())
    throw std::invalid_argument("emergency contact phone must be non-empty");
  std::lock_guard lock(write_mu_);
  auto st = writer_->prepare(
      "INSERT INTO drivers (driver_id, name, car, plate, contact_name, contact_phone) "
      "VALUES (?1, ?2, ?3, ?4, ?5, ?6) ON CONFLICT(driver_id) DO UPDATE SET "
      "name = excluded.name, car = excluded.car, plate = excluded.plate, "
      "contact_name = excluded.contact_name, contact_phone = excluded.contact_phone");
  st.bind(1, d.driver_id)
      .bind(2, d.name)
      .bind(3, d.car)
      .bind(4, d.plate)
      .bind(5, d.emergency_contact_name)
      .bind(6, d.emergency_contact_phone);
  st.step();
}

std::optional<DriverRecord> EventStore::get_driver(const std::string& driver_id) const {
  sql::Database db(path_, true);
  auto st = db.prepare(
      "SELECT driver_id, name, car, plate, contact_name, contact_phone FROM drivers "
      "WHERE driver_id = ?1");
  st.bind(1, driver_id);
  if (!st.step()) return std::nullopt;
  return DriverRecord{st.text(0), st.text(1), st.text(2), st.text(3), st.text(4), st.text(5)};
}

std::optional<EventRecord> EventStore::get_event(EventId id) const {
  sql::Database db(path_, true);
  auto st = db.prepare(std::string("SELECT ") + kEventColumns + " FROM events WHERE event_id = ?1");
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  return read_event(st);
}

std::vector<EventRecord> EventStore::query_events(TimestampMs from, TimestampMs to,
                                                  std::optional<EventKind> type) const {
  check_range(from, to);
  sql::Database db(path_, true);
  std::string text = std::string("SELECT ") + kEventColumns +
                     " FROM events WHERE t >= ?1 AND t < ?2";
  if (type) text += " AND type = ?3";
  text += " ORDER BY t, event_id";
  auto st = db.prepare(text);
  st.bind(1, from).bind(2, to);
  if (type) st.bind(3, std::string(to_string(*type)));
  std::vector<EventRecord> out;
  while (st.step()) out.push_back(read_event(st));
  return out;
}

std::uint64_t EventStore::count_events(TimestampMs from, TimestampMs to,
                                       std::optional<EventKind> type) const {
  check_range(from, to);
  sql::Database db(path_, true);
  std::string text = "SELECT COUNT(*) FROM events WHERE t >= ?1 AND t < ?2";
  if (type) text += " AND type = ?3";
  auto st = db.prepare(text);
  st.bind(1, from).bind(2, to);
  if (type) st.bind(3, std::string(to_string(*type)));
  st.step();
  return static_cast<std::uint64_t>(st.int64(0));
}

SpeedStats EventStore::speed_stats(TimestampMs from, TimestampMs to) const {
  check_range(from, to);
  sql::Database db(path_, true);
  auto st = db.prepare(
      "SELECT event_id, t, speed_kmh FROM events WHERE type = 'crash' AND t >= ?1 AND t < ?2 "
      "ORDER BY t, event_id");
  st.bind(1, from).bind(2, to);
  SpeedStats stats;
  double sum = 0.0;
  while (st.step()) {
    SpeedRow row{st.int64(0), st.int64(1), st.real(2)};
    sum += row.speed_kmh;
    stats.max = stats.max ? std::max(*stats.max, row.speed_kmh) : row.speed_kmh;
    stats.rows.push_back(row);
  }
  stats.count = stats.rows.size();
  if (stats.count > 0) stats.mean = sum / static_cast<double>(stats.count);
  return stats;
}

std::vector<TimeBucketCount> EventStore::counts_by_bucket(TimestampMs from, TimestampMs to,
                                                          std::int64_t bucket_ms) const {
  check_range(from, to);
  if (bucket_ms <= 0) throw RangeError("bucket_ms must be > 0");
  const std::int64_t span = to - from;
  const std::int64_t n = span / bucket_ms + (span % bucket_ms != 0 ? 1 : 0);
  if (n > 10'000'000) throw RangeError("too many buckets");

  std::vector<TimeBucketCount> buckets(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) buckets[static_cast<std::size_t>(i)].bucket_start =
      from + i * bucket_ms;

  sql::Database db(path_, true);
  auto st = db.prepare(
      "SELECT (t - ?1) / ?3 AS b, type, COUNT(*) FROM events WHERE t >= ?1 AND t < ?2 "
      "GROUP BY b, type");
  st.bind(1, from).bind(2, to).bind(3, bucket_ms);
  while (st.step()) {
    auto& bucket = buckets.at(static_cast<std::size_t>(st.int64(0)));
    const auto count = static_cast<std::uint64_t>(st.int64(2));
    if (st.text(1) == "crash") bucket.crashes += count;
    else bucket.potholes += count;
  }
  return buckets;
}

std::uint64_t EventStore::total_events() const {
  sql::Database db(path_, true);
  auto st = db.prepare("SELECT COUNT(*) FROM events");
  st.step();
  return static_cast<std::uint64_t>(st.int64(0));
}

std::vector<EventId> EventStore::crash_event_ids() const {
  sql::Database db(path_, true);
  auto st = db.prepare("SELECT event_id FROM events WHERE type = 'crash' ORDER BY event_id");
  std::vector<EventId> ids;
  while (st.step()) ids.push_back(st.int64(0));
  return ids;
}

// ---------------------------------------------------------------------------

ImportResult import_drivers_csv(std::istream& in, EventStore& store, std::ostream& warn) {
  ImportResult result;
  std::string line;
  if (!std::getline(in, line)) return result;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDriversCsvHeader)
    throw std::invalid_argument(std::string("drivers CSV header must be '") + kDriversCsvHeader +
                                "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6 || f[0].empty() || f[5].empty()) {
      warn << "line " << lineno << ": skipped malformed driver row\n";
      ++result.skipped;
      continue;
    }
    store.upsert_driver(DriverRecord{f[0], f[1], f[2], f[3], f[4], f[5]});
    ++result.imported;
  }
  return result;
}

}  // namespace crashnet
