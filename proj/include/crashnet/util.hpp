#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace crashnet {

/// Mean Earth radius in metres.
inline constexpr double kEarthRadiusM = 6371008.8;

/// Great-circle distance in metres between two lat/lon points in degrees.
double haversine_m(double lat1, double lon1, double lat2, double lon2);

/// Wall clock, milliseconds since the epoch.
std::int64_t now_ms();

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

std::string_view trim(std::string_view s);

/// "%.Nf" formatting without iostream state.
std::string fixed(double x, int decimals);

}  // namespace crashnet
