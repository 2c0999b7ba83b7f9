#include "crashnet/telephony.hpp"

#include <httplib.h>
#include <json.hpp>

namespace crashnet {

void MockTelephony::attempt(Channel channel, const std::string& to, const std::string& message) {
  std::lock_guard lock(mu_);
  ++attempts_;
  if (fail_remaining_ > 0) {
    --fail_remaining_;
    throw TelephonyError("scripted failure");
  }
  deliveries_.push_back({channel, to, message});
}

void MockTelephony::call(const std::string& to, const std::string& message) {
  attempt(Channel::voice, to, message);
}

void MockTelephony::text(const std::string& to, const std::string& message) {
  attempt(Channel::sms, to, message);
}

void MockTelephony::fail_next(int n) {
  std::lock_guard lock(mu_);
  fail_remaining_ = n;
}

std::vector<MockTelephony::Delivery> MockTelephony::deliveries() const {
  std::lock_guard lock(mu_);
  return deliveries_;
}

int MockTelephony::attempts() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

HttpTelephony::HttpTelephony(std::string base_url, std::string token)
    : base_url_(std::move(base_url)), token_(std::move(token)) {}

void HttpTelephony::post(const std::string& path, const std::string& to,
                         const std::string& message) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(std::chrono::seconds(10));
  if (!token_.empty()) client.set_bearer_token_auth(token_);
  const nlohmann::json body = {{"to", to}, {"message", message}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw TelephonyError("gateway unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw TelephonyError("gateway returned HTTP " + std::to_string(res->status));
}

void HttpTelephony::call(const std::string& to, const std::string& message) {
  post("/calls", to, message);
}

void HttpTelephony::text(const std::string& to, const std::string& message) {
  post("/messages", to, message);
}

}  // namespace crashnet
