#pragma once

namespace helios {

struct SolarPosition {
  double altitude = 0.0;  // deg, [-90, 90]
  double azimuth = 0.0;   // deg from north, clockwise, [0, 360)
};

/// Cooper declination and hour-angle geometry at solar time `hour`.
SolarPosition solar_position(double latitude_deg, int day_of_year, double hour);

}  // namespace helios
