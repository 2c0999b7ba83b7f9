#pragma once

#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace crashnet {

enum class Channel { voice, sms };

struct TelephonyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Outbound calls and texts. Implementations throw TelephonyError when the
/// provider refuses or cannot be reached.
class Telephony {
 public:
  virtual ~Telephony() = default;
  virtual void call(const std::string& to, const std::string& message) = 0;
  virtual void text(const std::string& to, const std::string& message) = 0;
};

/// Records every successful call/text in memory. fail_next(n) makes the next
/// n attempts throw.
class MockTelephony : public Telephony {
 public:
  struct Delivery {
    Channel channel;
    std::string to;
    std::string message;
  };

  void call(const std::string& to, const std::string& message) override;
  void text(const std::string& to, const std::string& message) override;

  void fail_next(int n);
  std::vector<Delivery> deliveries() const;
  int attempts() const;

 private:
  void attempt(Channel channel, const std::string& to, const std::string& message);

  mutable std::mutex mu_;
  std::vector<Delivery> deliveries_;
  int fail_remaining_ = 0;
  int attempts_ = 0;
};

/// Posts to an HTTP gateway: POST <base>/calls and <base>/messages with a
/// JSON body {"to", "message"} and a bearer token. Any non-2xx is a failure.
class HttpTelephony : public Telephony {
 public:
  HttpTelephony(std::string base_url, std::string token);
  void call(const std::string& to, const std::string& message) override;
  void text(const std::string& to, const std::string& message) override;

 private:
  void post(const std::string& path, const std::string& to, const std::string& message);
  std::string base_url_;
  std::string token_;
};

}  // namespace crashnet
