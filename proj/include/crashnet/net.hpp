#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crashnet::net {

struct NetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Owning file descriptor for a stream socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = o.release();
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void close();
  /// Wakes any thread blocked on this socket without closing the descriptor.
  void shutdown();

  void write_all(std::string_view bytes);
  /// Reads what is available. Empty optional on timeout, empty string on EOF.
  std::optional<std::string> read_some(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Parses "host:port".
Endpoint parse_endpoint(std::string_view text);

Socket connect_tcp(const Endpoint& ep, std::chrono::milliseconds timeout);

/// Binds and listens; port 0 picks a free port. Throws NetError when the port
/// is taken.
Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog = 128);

std::uint16_t local_port(const Socket& s);

/// Accepts one connection; empty optional on timeout.
std::optional<Socket> accept_with_timeout(const Socket& listener, std::chrono::milliseconds timeout);

}  // namespace crashnet::net
