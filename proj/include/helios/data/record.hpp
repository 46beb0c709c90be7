#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace helios {

/// One hourly sample: ambient features, plane-of-array state and the
/// ground-truth maximum power point labels.
struct WeatherRecord {
  std::string location_id;
  int year = 0;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;   // 0..23, local solar time
  double temp_air = 0.0;  // degC
  double dni = 0.0;       // W/m^2
  double dhi = 0.0;       // W/m^2
  double sun_alt = 0.0;   // deg
  double sun_azi = 0.0;   // deg from north, clockwise
  double wind = 0.0;      // m/s
  double rel_hum = 0.0;   // %
  double pm10 = 0.0;      // ug/m^3
  double g_eff = 0.0;     // W/m^2, plane of array
  double t_cell = 0.0;    // degC
  double vmp = 0.0;       // V
  double imp = 0.0;       // A
  double pmp = 0.0;       // W

  friend bool operator==(const WeatherRecord&, const WeatherRecord&) = default;
};

/// Time-ordered records of one location.
struct LocationSeries {
  std::string location_id;
  std::vector<WeatherRecord> records;
};

using Dataset = std::vector<LocationSeries>;

inline constexpr int kDaysPerYear = 365;
inline constexpr int kHoursPerYear = 8760;

/// Day of year (1..365) in the non-leap calendar.
int day_of_year(int month, int day);
/// Inverse of day_of_year; doy outside 1..365 is a parameter error.
void month_day_of(int doy, int& month, int& day);
/// Continuous hour counter; consecutive hours differ by exactly 1.
long long hour_stamp(const WeatherRecord& rec);

/// Throws ErrorCode::integrity describing the first violated invariant.
void validate_record(const WeatherRecord& rec);

std::string_view dataset_csv_header();

void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Parses the canonical CSV. Rejects missing columns, rows of a location
/// that are not contiguous in the file, and non-increasing timestamps.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

}  // namespace helios
