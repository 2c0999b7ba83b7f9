#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crashnet/detection.hpp"
#include "crashnet/net.hpp"
#include "crashnet/trace.hpp"
#include "crashnet/wire.hpp"

namespace crashnet {

struct BlackBoxEntry {
  std::uint64_t log_seq = 0;
  /// The exact bytes that go on the wire, newline included.
  std::string frame;
  wire::EventReport report;
  bool acked = false;
};

struct BlackBoxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Local append-only event log. `events.log` holds one encoded frame per
/// line (line n is log_seq n); `acked` holds the highest acknowledged
/// log_seq and is replaced atomically.
class BlackBox {
 public:
  explicit BlackBox(std::filesystem::path dir);
  ~BlackBox();
  BlackBox(const BlackBox&) = delete;
  BlackBox& operator=(const BlackBox&) = delete;

  /// Assigns the next log_seq (also the report's wire seq), writes the frame
  /// and syncs it to disk before returning.
  BlackBoxEntry append(const DetectedEvent& ev);

  /// Records the ack for log_seq. Acks arrive in log order.
  void mark_acked(std::uint64_t log_seq);

  std::vector<BlackBoxEntry> entries() const;
  std::vector<BlackBoxEntry> unacked() const;
  std::uint64_t size() const { return frames_.size(); }
  std::uint64_t acked_through() const { return watermark_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  BlackBoxEntry entry_at(std::uint64_t log_seq) const;
  void write_watermark(std::uint64_t value);

  std::filesystem::path dir_;
  std::vector<std::string> frames_;
  std::uint64_t watermark_ = 0;
  int log_fd_ = -1;
};

enum class Delivery { acked, rejected, failed };

/// Carries one frame to the server and waits for its reply.
class ReportLink {
 public:
  virtual ~ReportLink() = default;
  virtual Delivery deliver(const std::string& frame, std::uint64_t seq) = 0;
};

struct TcpLinkOptions {
  std::chrono::milliseconds connect_timeout{1000};
  std::chrono::milliseconds ack_timeout{3000};
};

/// Persistent connection, reopened lazily after any failure.
class TcpLink : public ReportLink {
 public:
  explicit TcpLink(net::Endpoint ep, TcpLinkOptions opts = {});
  Delivery deliver(const std::string& frame, std::uint64_t seq) override;
  std::uint64_t connects() const { return connects_; }

 private:
  net::Endpoint ep_;
  TcpLinkOptions opts_;
  net::Socket sock_;
  wire::FrameSplitter replies_;
  std::uint64_t connects_ = 0;
};

struct AgentOptions {
  /// 0 replays as fast as possible; N > 0 runs N times faster than the trace.
  double time_scale = 0.0;
  /// Trace time between redelivery attempts while entries are unacked.
  std::int64_t retry_interval_ms = 1000;
  /// Extra delivery rounds after the trace ends.
  int final_attempts = 3;
  std::chrono::milliseconds final_retry_delay{200};
};

struct RunReport {
  std::uint64_t detected = 0;
  std::uint64_t acked = 0;
  std::uint64_t retransmissions = 0;

  bool operator==(const RunReport&) const = default;
};

/// The software device: detect -> log -> send.
class Agent {
 public:
  Agent(BlackBox& box, ReportLink& link, AgentOptions opts = {});

  RunReport replay(const TraceFile& trace, const std::string& driver_id, const DetectionConfig& cfg);

  /// Re-sends unacked entries in log order; returns how many became acked.
  std::uint64_t flush_unacked();

  /// Called after an event has been logged, before it is sent.
  std::function<void(const BlackBoxEntry&)> on_logged;
  /// Called after the server acknowledged an entry.
  std::function<void(const BlackBoxEntry&)> on_acked;

 private:
  /// One delivery pass; stops at the first entry that is not acked.
  bool deliver_pending();

  BlackBox& box_;
  ReportLink& link_;
  AgentOptions opts_;
  std::map<std::uint64_t, std::uint64_t> attempts_;
  std::uint64_t retransmissions_ = 0;
};

}  // namespace crashnet
