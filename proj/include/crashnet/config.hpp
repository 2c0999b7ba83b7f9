#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crashnet/detection.hpp"

namespace crashnet {

enum class GeocoderMode { gazetteer, external };
enum class TelephonyMode { mock, external };

/// Server-side settings shared by `serve` and `demo`.
struct Config {
  std::string host = "0.0.0.0";
  std::uint16_t wire_port = 7080;
  std::uint16_t api_port = 7081;
  std::string db_path = "crashnet.db";

  GeocoderMode geocoder = GeocoderMode::gazetteer;
  /// Empty means every address falls back to coordinates.
  std::string gazetteer_path;
  std::string geocoder_url;

  TelephonyMode telephony = TelephonyMode::mock;
  std::string telephony_url;
  std::string telephony_token;
  /// External telephony places real calls; refuse unless this is set.
  bool allow_external_telephony = false;

  std::string emergency_number = "+15555550911";
  int retry_max_attempts = 3;
  std::int64_t retry_base_ms = 1000;
  double retry_factor = 2.0;
  std::int64_t retry_cap_ms = 30000;
  int dispatch_workers = 2;

  std::string cors_origin = "*";
  std::int64_t heartbeat_ms = 15000;
};

/// Every settable key, in the spelling used by config files and flags.
/// The environment form is CRASHNET_ plus the upper-cased key.
const std::vector<std::string>& config_keys();

/// Parses and stores one value; throws ConfigError on an unknown key or a
/// malformed value.
void set_config_value(Config& cfg, const std::string& key, const std::string& value);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Layers defaults < config file < environment < flags. `flags` holds only
/// values the user actually passed.
Config resolve_config(const std::optional<std::string>& config_file, const EnvLookup& env,
                      const std::map<std::string, std::string>& flags);

/// Ports distinct, database directory creatable, gazetteer readable,
/// external modes fully configured.
void validate(const Config& cfg);

}  // namespace crashnet
