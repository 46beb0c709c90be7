#include "helios/pv/solar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "helios/core/error.hpp"

namespace helios {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

SolarPosition solar_position(double latitude_deg, int day_of_year, double hour) {
  if (!(latitude_deg >= -90.0 && latitude_deg <= 90.0)) {
    fail(ErrorCode::parameter, "latitude out of range: " + std::to_string(latitude_deg));
  }
  const double decl = 23.45 * kDeg * std::sin(2.0 * std::numbers::pi * (284.0 + day_of_year) / 365.0);
  const double h = 15.0 * (hour - 12.0) * kDeg;
  const double lat = latitude_deg * kDeg;

  const double sin_alt = std::clamp(
      std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(h), -1.0, 1.0);
  const double alt = std::asin(sin_alt);

  // cos(az) measured from north; afternoon (h > 0) mirrors into the west.
  const double denom = std::cos(alt) * std::cos(lat);
  double az = std::numbers::pi;  // degenerate (zenith or pole): report due south
  if (std::abs(denom) > 1e-12) {
    const double cos_az = std::clamp((std::sin(decl) - sin_alt * std::sin(lat)) / denom, -1.0, 1.0);
    az = std::acos(cos_az);
    if (h > 0.0) az = 2.0 * std::numbers::pi - az;
  }
  double az_deg = az / kDeg;
  if (az_deg >= 360.0) az_deg -= 360.0;
  return {alt / kDeg, az_deg};
}

}  // namespace helios
