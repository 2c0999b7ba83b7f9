#include "crashnet/geocode.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "crashnet/util.hpp"

namespace crashnet {

const char* to_string(GeocodeSource s) {
  switch (s) {
    case GeocodeSource::gazetteer: return "gazetteer";
    case GeocodeSource::fallback: return "fallback";
    case GeocodeSource::external: return "external";
  }
  return "?";
}

std::string fallback_address(double lat, double lon) {
  return "near " + fixed(lat, 5) + "," + fixed(lon, 5);
}

GazetteerGeocoder::GazetteerGeocoder(std::vector<GazetteerEntry> entries, double radius_m)
    : entries_(std::move(entries)), radius_m_(radius_m) {}

GazetteerGeocoder GazetteerGeocoder::from_csv(std::istream& in, double radius_m) {
  std::vector<GazetteerEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (lineno == 1 && f.size() == 3 && trim(f[0]) == "name" && trim(f[1]) == "lat") continue;
    if (f.size() != 3) throw std::invalid_argument("gazetteer line " + std::to_string(lineno) +
                                                   ": expected name,lat,lon");
    try {
      entries.push_back({f[0], std::stod(f[1]), std::stod(f[2])});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("gazetteer line " + std::to_string(lineno) + ": bad coordinate");
    }
  }
  return GazetteerGeocoder(std::move(entries), radius_m);
}

GazetteerGeocoder GazetteerGeocoder::from_file(const std::string& path, double radius_m) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gazetteer " + path);
  return from_csv(in, radius_m);
}

GeocodeResult GazetteerGeocoder::reverse_geocode(double lat, double lon) {
  const GazetteerEntry* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) {
    const double d = haversine_m(lat, lon, e.lat, e.lon);
    if (d < best_d) {
      best_d = d;
      best = &e;
    }
  }
  if (best && best_d <= radius_m_) return {best->name, GeocodeSource::gazetteer};
  return {fallback_address(lat, lon), GeocodeSource::fallback};
}

HttpGeocoder::HttpGeocoder(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

GeocodeResult HttpGeocoder::reverse_geocode(double lat, double lon) {
  try {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    const std::string path = "/reverse?lat=" + fixed(lat, 7) + "&lon=" + fixed(lon, 7);
    auto res = client.Get(path);
    if (res && res->status == 200) {
      const auto doc = nlohmann::json::parse(res->body);
      const std::string address = doc.at("address").get<std::string>();
      if (!address.empty()) return {address, GeocodeSource::external};
    }
  } catch (const std::exception&) {
  }
  return {fallback_address(lat, lon), GeocodeSource::fallback};
}

}  // namespace crashnet
