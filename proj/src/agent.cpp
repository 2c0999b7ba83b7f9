#include "crashnet/agent.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <thread>

namespace crashnet {

namespace fs = std::filesystem;

namespace {

void write_fully(int fd, std::string_view bytes, const char* what) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BlackBoxError(std::string(what) + ": " + std::strerror(errno));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

void sync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

BlackBox::BlackBox(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  const fs::path log = dir_ / "events.log";

  std::string content;
  {
    std::ifstream in(log, std::ios::binary);
    if (in) content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  // A torn final write leaves a line without its newline; drop it.
  const auto complete = content.rfind('\n');
  const std::size_t keep = complete == std::string::npos ? 0 : complete + 1;
  if (keep != content.size()) {
    fs::resize_file(log, keep);
    content.resize(keep);
  }
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    frames_.push_back(content.substr(pos, nl - pos + 1));
    pos = nl + 1;
  }

  std::ifstream wm(dir_ / "acked");
  std::uint64_t value = 0;
  if (wm >> value) watermark_ = std::min<std::uint64_t>(value, frames_.size());

  log_fd_ = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log_fd_ < 0) throw BlackBoxError("open " + log.string() + ": " + std::strerror(errno));
}

BlackBox::~BlackBox() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

BlackBoxEntry BlackBox::append(const DetectedEvent& ev) {
  const std::uint64_t seq = frames_.size() + 1;
  std::string frame = wire::encode_report(wire::to_report(ev, seq));
  write_fully(log_fd_, frame, "append black box");
  if (::fsync(log_fd_) < 0) throw BlackBoxError(std::string("fsync: ") + std::strerror(errno));
  frames_.push_back(std::move(frame));
  return entry_at(seq);
}

void BlackBox::write_watermark(std::uint64_t value) {
  const fs::path tmp = dir_ / "acked.tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw BlackBoxError("open " + tmp.string() + ": " + std::strerror(errno));
  try {
    write_fully(fd, std::to_string(value) + "\n", "write ack watermark");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, dir_ / "acked");
  sync_dir(dir_);
}

void BlackBox::mark_acked(std::uint64_t log_seq) {
  if (log_seq <= watermark_) return;
  if (log_seq != watermark_ + 1 || log_seq > frames_.size())
    throw BlackBoxError("ack for log_seq " + std::to_string(log_seq) + " out of order");
  write_watermark(log_seq);
  watermark_ = log_seq;
}

BlackBoxEntry BlackBox::entry_at(std::uint64_t log_seq) const {
  BlackBoxEntry e;
  e.log_seq = log_seq;
  e.frame = frames_.at(log_seq - 1);
  e.report = wire::decode_report(e.frame);
  e.acked = log_seq <= watermark_;
  return e;
}

std::vector<BlackBoxEntry> BlackBox::entries() const {
  std::vector<BlackBoxEntry> out;
  for (std::uint64_t s = 1; s <= frames_.size(); ++s) out.push_back(entry_at(s));
  return out;
}

std::vector<BlackBoxEntry> BlackBox::unacked() const {
  std::vector<BlackBoxEntry> out;
  for (std::uint64_t s = watermark_ + 1; s <= frames_.size(); ++s) out.push_back(entry_at(s));
  return out;
}

// ---------------------------------------------------------------------------

TcpLink::TcpLink(net::Endpoint ep, TcpLinkOptions opts) : ep_(std::move(ep)), opts_(opts) {}

Delivery TcpLink::deliver(const std::string& frame, std::uint64_t seq) {
  try {
    if (!sock_.valid()) {
      sock_ = net::connect_tcp(ep_, opts_.connect_timeout);
      replies_ = wire::FrameSplitter();
      ++connects_;
    }
    sock_.write_all(frame);

    const auto deadline = std::chrono::steady_clock::now() + opts_.ack_timeout;
    for (;;) {
      while (auto line = replies_.next()) {
        const wire::Reply reply = wire::decode_reply(*line);
        if (reply.ack) {
          if (*reply.ack == seq) return Delivery::acked;
          continue;  // stale ack from an earlier attempt
        }
        if (reply.err && reply.err == "v") sock_.close();
        return Delivery::rejected;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) break;
      auto chunk = sock_.read_some(left);
      if (!chunk) break;
      if (chunk->empty()) break;  // peer closed
      replies_.feed(*chunk);
    }
  } catch (const std::exception&) {
  }
  sock_.close();
  return Delivery::failed;
}

// ---------------------------------------------------------------------------

Agent::Agent(BlackBox& box, ReportLink& link, AgentOptions opts)
    : box_(box), link_(link), opts_(opts) {}

bool Agent::deliver_pending() {
  for (const auto& entry : box_.unacked()) {
    if (attempts_[entry.log_seq]++ > 0) ++retransmissions_;
    if (link_.deliver(entry.frame, entry.log_seq) != Delivery::acked) return false;
    box_.mark_acked(entry.log_seq);
    if (on_acked) {
      BlackBoxEntry done = entry;
      done.acked = true;
      on_acked(done);
    }
  }
  return true;
}

RunReport Agent::replay(const TraceFile& trace, const std::string& driver_id,
                        const DetectionConfig& cfg) {
  Detector detector(driver_id, cfg);
  RunReport report;
  const std::uint64_t first_seq = box_.size() + 1;
  const std::uint64_t retrans_before = retransmissions_;
  constexpr std::int64_t kNoRetry = std::numeric_limits<std::int64_t>::max();
  std::int64_t next_retry = kNoRetry;

  const auto wall_start = std::chrono::steady_clock::now();
  std::optional<TimestampMs> trace_start;
  TimestampMs now_t = 0;

  auto record = [&](std::vector<DetectedEvent>&& events) {
    if (events.empty()) return;
    for (const auto& ev : events) {
      const BlackBoxEntry entry = box_.append(ev);
      ++report.detected;
      if (on_logged) on_logged(entry);
    }
    if (deliver_pending()) next_retry = kNoRetry;
    else next_retry = now_t + opts_.retry_interval_ms;
  };

  for (const auto& row : trace.rows) {
    now_t = std::visit([](const auto& r) { return r.t; }, row);
    if (!trace_start) trace_start = now_t;
    if (opts_.time_scale > 0.0) {
      const auto offset = std::chrono::duration<double, std::milli>(
          static_cast<double>(now_t - *trace_start) / opts_.time_scale);
      std::this_thread::sleep_until(
          wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(offset));
    }
    if (const auto* s = std::get_if<AccelSample>(&row)) record(detector.push_sample(*s));
    else record(detector.push_fix(std::get<GpsFix>(row)));

    if (now_t >= next_retry) {
      if (deliver_pending()) next_retry = kNoRetry;
      else next_retry = now_t + opts_.retry_interval_ms;
    }
  }
  record(detector.finish());

  for (int i = 0; i < opts_.final_attempts && box_.acked_through() < box_.size(); ++i) {
    std::this_thread::sleep_for(opts_.final_retry_delay);
    deliver_pending();
  }

  const std::uint64_t last = std::min<std::uint64_t>(box_.acked_through(), box_.size());
  report.acked = last >= first_seq ? last - first_seq + 1 : 0;
  report.retransmissions = retransmissions_ - retrans_before;
  return report;
}

std::uint64_t Agent::flush_unacked() {
  if (box_.acked_through() >= box_.size()) return 0;
  const std::uint64_t before = box_.acked_through();
  deliver_pending();
  return box_.acked_through() - before;
}

}  // namespace crashnet
