#pragma once

#include <chrono>
#include <iosfwd>
#include <string>
#include <vector>

namespace crashnet {

enum class GeocodeSource { gazetteer, fallback, external };

const char* to_string(GeocodeSource s);

struct GeocodeResult {
  std::string address;
  GeocodeSource source = GeocodeSource::fallback;
};

/// "near <lat>,<lon>" with five decimals.
std::string fallback_address(double lat, double lon);

class Geocoder {
 public:
  virtual ~Geocoder() = default;
  /// Never throws for in-range coordinates; degrades to the fallback string.
  virtual GeocodeResult reverse_geocode(double lat, double lon) = 0;
};

struct GazetteerEntry {
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
};

/// Offline reverse geocoder over a `name,lat,lon` CSV. The nearest entry
/// within the acceptance radius wins; equal distances keep file order.
class GazetteerGeocoder : public Geocoder {
 public:
  static constexpr double kDefaultRadiusM = 250.0;

  explicit GazetteerGeocoder(std::vector<GazetteerEntry> entries,
                             double radius_m = kDefaultRadiusM);

  static GazetteerGeocoder from_csv(std::istream& in, double radius_m = kDefaultRadiusM);
  static GazetteerGeocoder from_file(const std::string& path, double radius_m = kDefaultRadiusM);

  GeocodeResult reverse_geocode(double lat, double lon) override;

  const std::vector<GazetteerEntry>& entries() const { return entries_; }

 private:
  std::vector<GazetteerEntry> entries_;
  double radius_m_;
};

/// Delegates to an HTTP service: GET <base>/reverse?lat=..&lon=.. answering
/// {"address": "..."}. Any failure yields the fallback string.
class HttpGeocoder : public Geocoder {
 public:
  explicit HttpGeocoder(std::string base_url,
                        std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));
  GeocodeResult reverse_geocode(double lat, double lon) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace crashnet
