#include "helios/data/record.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "helios/core/error.hpp"

namespace helios {

namespace {

constexpr std::array<int, 12> kMonthDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

constexpr std::array<std::string_view, 18> kColumns = {
    "location_id", "year",      "month",       "day",     "hour",        "temp_air_c",
    "dni_wm2",     "dhi_wm2",   "sun_alt_deg", "sun_azi_deg", "wind_ms", "rel_hum_pct",
    "pm10_ugm3",   "g_eff_wm2", "t_cell_c",    "vmp_v",   "imp_a",       "pmp_w"};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

int parse_int(std::string_view text, std::size_t line_no) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::format, "line " + std::to_string(line_no) + ": bad integer '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

int day_of_year(int month, int day) {
  if (month < 1 || month > 12) fail(ErrorCode::parameter, "month out of range: " + std::to_string(month));
  int doy = day;
  for (int m = 1; m < month; ++m) doy += kMonthDays[m - 1];
  return doy;
}

void month_day_of(int doy, int& month, int& day) {
  if (doy < 1 || doy > kDaysPerYear) fail(ErrorCode::parameter, "day of year out of range: " + std::to_string(doy));
  month = 1;
  while (doy > kMonthDays[month - 1]) {
    doy -= kMonthDays[month - 1];
    ++month;
  }
  day = doy;
}

long long hour_stamp(const WeatherRecord& rec) {
  return (static_cast<long long>(rec.year) * kDaysPerYear + day_of_year(rec.month, rec.day) - 1) * 24 + rec.hour;
}

void validate_record(const WeatherRecord& r) {
  auto bad = [&](const std::string& what) {
    fail(ErrorCode::integrity, r.location_id + " " + std::to_string(r.year) + "-" + std::to_string(r.month) + "-" +
                                   std::to_string(r.day) + " h" + std::to_string(r.hour) + ": " + what);
  };
  if (r.month < 1 || r.month > 12) bad("month out of range");
  if (r.day < 1 || r.day > kMonthDays[r.month - 1]) bad("day out of range");
  if (r.hour < 0 || r.hour > 23) bad("hour out of range");
  const std::array<double, 13> values = {r.temp_air, r.dni, r.dhi,    r.sun_alt, r.sun_azi, r.wind, r.rel_hum,
                                         r.pm10,     r.g_eff, r.t_cell, r.vmp,    r.imp,     r.pmp};
  for (double v : values) {
    if (!std::isfinite(v)) bad("non-finite field");
  }
  if (r.dni < 0 || r.dhi < 0 || r.g_eff < 0 || r.pmp < 0 || r.rel_hum < 0 || r.pm10 < 0 || r.wind < 0) {
    bad("negative physical quantity");
  }
  if (r.vmp < 0 || r.imp < 0) bad("negative operating point");
  if (r.sun_alt < -90 || r.sun_alt > 90) bad("solar altitude out of range");
  if (std::abs(r.pmp - r.vmp * r.imp) > 1e-6 * std::max(1.0, std::abs(r.pmp))) bad("pmp != vmp * imp");
  if (r.g_eff < 1.0 && (r.vmp != 0.0 || r.imp != 0.0 || r.pmp != 0.0)) bad("night record with non-zero labels");
}

std::string_view dataset_csv_header() {
  static const std::string header = [] {
    std::string h;
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
      if (i) h += ',';
      h += kColumns[i];
    }
    return h;
  }();
  return header;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) fail(ErrorCode::format, "cannot format double");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::format, "bad number '" + std::string(text) + "'");
  }
  return v;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << dataset_csv_header() << '\n';
  std::string line;
  for (const auto& loc : data) {
    for (const auto& r : loc.records) {
      line.clear();
      line += r.location_id;
      for (int v : {r.year, r.month, r.day, r.hour}) {
        line += ',';
        line += std::to_string(v);
      }
      for (double v : {r.temp_air, r.dni, r.dhi, r.sun_alt, r.sun_azi, r.wind, r.rel_hum, r.pm10, r.g_eff, r.t_cell,
                       r.vmp, r.imp, r.pmp}) {
        line += ',';
        line += format_double(v);
      }
      line += '\n';
      out << line;
    }
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  write_dataset_csv(out, data);
  out.flush();
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::format, "dataset CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  std::array<std::size_t, kColumns.size()> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) fail(ErrorCode::format, "dataset CSV is missing column '" + std::string(kColumns[c]) + "'");
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  Dataset data;
  std::unordered_set<std::string> finished;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_commas(line);
    if (f.size() != header.size()) {
      fail(ErrorCode::format, "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(f.size()));
    }
    WeatherRecord r;
    r.location_id = std::string(f[col[0]]);
    r.year = parse_int(f[col[1]], line_no);
    r.month = parse_int(f[col[2]], line_no);
    r.day = parse_int(f[col[3]], line_no);
    r.hour = parse_int(f[col[4]], line_no);
    double* targets[] = {&r.temp_air, &r.dni,  &r.dhi,   &r.sun_alt, &r.sun_azi, &r.wind, &r.rel_hum,
                         &r.pm10,     &r.g_eff, &r.t_cell, &r.vmp,    &r.imp,     &r.pmp};
    for (std::size_t k = 0; k < 13; ++k) {
      try {
        *targets[k] = parse_double(f[col[5 + k]]);
      } catch (const Error& e) {
        fail(ErrorCode::format, "line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (r.month < 1 || r.month > 12 || r.hour < 0 || r.hour > 23) {
      fail(ErrorCode::integrity, "line " + std::to_string(line_no) + ": month/hour out of range");
    }

    if (data.empty() || data.back().location_id != r.location_id) {
      if (!data.empty()) finished.insert(data.back().location_id);
      if (finished.count(r.location_id)) {
        fail(ErrorCode::integrity, "line " + std::to_string(line_no) + ": rows of location '" + r.location_id +
                                       "' are not grouped together");
      }
      data.push_back({r.location_id, {}});
    } else if (hour_stamp(r) <= hour_stamp(data.back().records.back())) {
      fail(ErrorCode::integrity, "line " + std::to_string(line_no) + ": timestamps of location '" + r.location_id +
                                     "' are not increasing");
    }
    data.back().records.push_back(std::move(r));
  }
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open dataset " + path.string());
  return read_dataset_csv(in);
}

}  // namespace helios
