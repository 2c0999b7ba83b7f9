#include "crashnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace crashnet {

namespace {

template <typename T>
T parse_int(const std::string& key, const std::string& v, T lo, T hi) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || out < static_cast<long long>(lo) ||
      out > static_cast<long long>(hi))
    throw ConfigError(key + ": expected an integer in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "], got '" + v + "'");
  return static_cast<T>(out);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off" || v.empty()) return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(Config&, const std::string& key, const std::string& v)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"host", [](Config& c, auto&, auto& v) { c.host = v; }},
      {"wire_port",
       [](Config& c, auto& k, auto& v) { c.wire_port = parse_int<std::uint16_t>(k, v, 0, 65535); }},
      {"api_port",
       [](Config& c, auto& k, auto& v) { c.api_port = parse_int<std::uint16_t>(k, v, 0, 65535); }},
      {"db_path", [](Config& c, auto&, auto& v) { c.db_path = v; }},
      {"geocoder",
       [](Config& c, auto& k, auto& v) {
         if (v == "gazetteer") c.geocoder = GeocoderMode::gazetteer;
         else if (v == "external") c.geocoder = GeocoderMode::external;
         else throw ConfigError(k + ": expected gazetteer or external, got '" + v + "'");
       }},
      {"gazetteer_path", [](Config& c, auto&, auto& v) { c.gazetteer_path = v; }},
      {"geocoder_url", [](Config& c, auto&, auto& v) { c.geocoder_url = v; }},
      {"telephony",
       [](Config& c, auto& k, auto& v) {
         if (v == "mock") c.telephony = TelephonyMode::mock;
         else if (v == "external") c.telephony = TelephonyMode::external;
         else throw ConfigError(k + ": expected mock or external, got '" + v + "'");
       }},
      {"telephony_url", [](Config& c, auto&, auto& v) { c.telephony_url = v; }},
      {"telephony_token", [](Config& c, auto&, auto& v) { c.telephony_token = v; }},
      {"allow_external_telephony",
       [](Config& c, auto& k, auto& v) { c.allow_external_telephony = parse_bool(k, v); }},
      {"emergency_number", [](Config& c, auto&, auto& v) { c.emergency_number = v; }},
      {"retry_max_attempts",
       [](Config& c, auto& k, auto& v) { c.retry_max_attempts = parse_int<int>(k, v, 1, 100); }},
      {"retry_base_ms",
       [](Config& c, auto& k, auto& v) {
         c.retry_base_ms = parse_int<std::int64_t>(k, v, 0, 3'600'000);
       }},
      {"retry_factor",
       [](Config& c, auto& k, auto& v) {
         c.retry_factor = parse_double(k, v);
         if (c.retry_factor < 1.0) throw ConfigError(k + ": must be >= 1");
       }},
      {"retry_cap_ms",
       [](Config& c, auto& k, auto& v) {
         c.retry_cap_ms = parse_int<std::int64_t>(k, v, 0, 3'600'000);
       }},
      {"dispatch_workers",
       [](Config& c, auto& k, auto& v) { c.dispatch_workers = parse_int<int>(k, v, 1, 64); }},
      {"cors_origin", [](Config& c, auto&, auto& v) { c.cors_origin = v; }},
      {"heartbeat_ms",
       [](Config& c, auto& k, auto& v) {
         c.heartbeat_ms = parse_int<std::int64_t>(k, v, 10, 3'600'000);
       }},
  };
  return table;
}

std::string env_name(const std::string& key) {
  std::string out = "CRASHNET_";
  for (char ch : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(Config& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, set] : setters()) {
    if (name == key) {
      set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

Config resolve_config(const std::optional<std::string>& config_file, const EnvLookup& env,
                      const std::map<std::string, std::string>& flags) {
  Config cfg;
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw ConfigError("cannot read config file " + *config_file);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file " + *config_file + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file " + *config_file + ": expected an object");
    for (const auto& [key, v] : j.items()) {
      if (v.is_string()) set_config_value(cfg, key, v.get<std::string>());
      else if (v.is_boolean()) set_config_value(cfg, key, v.get<bool>() ? "true" : "false");
      else if (v.is_number()) set_config_value(cfg, key, v.dump());
      else throw ConfigError("config file " + *config_file + ": bad value for '" + key + "'");
    }
  }
  if (env) {
    for (const auto& key : config_keys())
      if (auto v = env(env_name(key))) set_config_value(cfg, key, *v);
  }
  for (const auto& [key, v] : flags) set_config_value(cfg, key, v);
  return cfg;
}

void validate(const Config& cfg) {
  namespace fs = std::filesystem;
  if (cfg.wire_port != 0 && cfg.wire_port == cfg.api_port)
    throw ConfigError("wire_port and api_port must differ (both " +
                      std::to_string(cfg.wire_port) + ")");
  if (cfg.db_path.empty()) throw ConfigError("db_path is empty");
  const fs::path parent = fs::absolute(cfg.db_path).parent_path();
  std::error_code ec;
  if (!fs::exists(parent, ec) && !fs::create_directories(parent, ec))
    throw ConfigError("cannot create database directory " + parent.string());
  if (cfg.geocoder == GeocoderMode::gazetteer && !cfg.gazetteer_path.empty()) {
    std::ifstream in(cfg.gazetteer_path);
    if (!in) throw ConfigError("cannot read gazetteer " + cfg.gazetteer_path);
  }
  if (cfg.geocoder == GeocoderMode::external && cfg.geocoder_url.empty())
    throw ConfigError("geocoder=external needs geocoder_url");
  if (cfg.telephony == TelephonyMode::external) {
    if (cfg.telephony_url.empty()) throw ConfigError("telephony=external needs telephony_url");
    if (!cfg.allow_external_telephony)
      throw ConfigError(
          "telephony=external places real calls; pass --allow-external-telephony to confirm");
  }
  if (cfg.emergency_number.empty()) throw ConfigError("emergency_number is empty");
  if (cfg.retry_cap_ms < cfg.retry_base_ms)
    throw ConfigError("retry_cap_ms must be >= retry_base_ms");
}

}  // namespace crashnet
