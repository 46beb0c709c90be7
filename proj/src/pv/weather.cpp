#include "helios/pv/weather.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "helios/core/error.hpp"
#include "helios/pv/solar.hpp"

namespace helios {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double clear_sky_dni(double altitude_deg) {
  if (altitude_deg <= 0.0) return 0.0;
  const double air_mass = 1.0 / std::max(std::sin(altitude_deg * kDeg), 0.01);
  return 1361.0 * std::pow(0.7, std::pow(air_mass, 0.678));
}

double clear_sky_dhi(double altitude_deg) {
  if (altitude_deg <= 0.0) return 0.0;
  return 0.1 * clear_sky_dni(altitude_deg) * std::sin(altitude_deg * kDeg);
}

WeatherRecord synth_weather_step(WeatherState& s, const SynthConfig& cfg, long long t, RngStream& rng) {
  if (t < 0) fail(ErrorCode::parameter, "hour index must be non-negative");
  const int hour = static_cast<int>(t % 24);
  const long long day_index = t / 24;
  const int doy = static_cast<int>(day_index % kDaysPerYear) + 1;

  WeatherRecord r;
  r.location_id = cfg.location_id;
  r.year = cfg.start_year + static_cast<int>(day_index / kDaysPerYear);
  month_day_of(doy, r.month, r.day);
  r.hour = hour;

  const SolarPosition pos = solar_position(cfg.latitude, doy, hour);
  r.sun_alt = pos.altitude;
  r.sun_azi = pos.azimuth;

  if (!s.initialized) {
    s.cloud = cfg.cloud_mean;
    s.initialized = true;
  }
  s.cloud = std::clamp(cfg.cloud_mean + cfg.cloud_ar * (s.cloud - cfg.cloud_mean) + cfg.cloud_noise * rng.normal(),
                       0.0, 1.0);
  s.temp_resid = cfg.temp_ar * s.temp_resid + cfg.temp_noise * rng.normal();
  s.wind_dev = cfg.wind_ar * s.wind_dev + cfg.wind_noise * rng.normal();
  s.log_pm_dev = cfg.pm_ar * s.log_pm_dev + cfg.pm_noise * rng.normal();
  const double hum_noise = cfg.hum_noise * rng.normal();

  const double c = s.cloud;
  r.dni = clear_sky_dni(pos.altitude) * (1.0 - c) * (1.0 - c) * (1.0 - c);
  r.dhi = clear_sky_dhi(pos.altitude) * (1.0 + 2.0 * c);

  const double seasonal = cfg.temp_mean - cfg.temp_seasonal_amp * std::cos(kTwoPi * (doy - 15) / 365.0);
  const double diurnal = cfg.temp_diurnal_amp * std::sin(kTwoPi * (hour - 9) / 24.0);
  r.temp_air = seasonal + diurnal + s.temp_resid;

  r.wind = std::max(0.0, cfg.wind_mean + s.wind_dev);
  r.rel_hum = std::clamp(cfg.hum_base + cfg.hum_cloud_gain * c - cfg.hum_temp_gain * (r.temp_air - seasonal) + hum_noise,
                         5.0, 100.0);
  r.pm10 = std::clamp(std::exp(cfg.log_pm_mean + s.log_pm_dev), 5.0, 500.0);
  return r;
}

void SynthConfig::validate() const {
  auto check_ar = [&](double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) fail(ErrorCode::config, location_id + ": " + name + " must lie in [0, 1)");
  };
  check_ar(temp_ar, "temp_ar");
  check_ar(cloud_ar, "cloud_ar");
  check_ar(wind_ar, "wind_ar");
  check_ar(pm_ar, "pm_ar");
  for (double v : {temp_noise, cloud_noise, wind_noise, hum_noise, pm_noise}) {
    if (!(v >= 0.0)) fail(ErrorCode::config, location_id + ": noise scales must be non-negative");
  }
  if (!(latitude >= -90.0 && latitude <= 90.0)) fail(ErrorCode::config, location_id + ": latitude out of range");
  if (!(k_pm >= 0.0 && k_h >= 0.0)) fail(ErrorCode::config, location_id + ": derate coefficients must be >= 0");
  if (location_id.empty() || location_id.find(',') != std::string::npos) {
    fail(ErrorCode::config, "location_id must be non-empty and free of commas");
  }
}

#define HELIOS_SYNTH_FIELDS(X)                                                                               \
  X(latitude) X(temp_mean) X(temp_seasonal_amp) X(temp_diurnal_amp) X(temp_ar) X(temp_noise) X(cloud_mean) \
  X(cloud_ar) X(cloud_noise) X(wind_mean) X(wind_ar) X(wind_noise) X(hum_base) X(hum_cloud_gain)            \
  X(hum_temp_gain) X(hum_noise) X(log_pm_mean) X(pm_ar) X(pm_noise) X(k_pm) X(k_h)

void SynthConfig::write(KvConfig& kv, const std::string& prefix) const {
  kv.set(prefix + "location_id", location_id);
  kv.set(prefix + "seed", seed);
  kv.set(prefix + "start_year", start_year);
#define X(name) kv.set(prefix + #name, name);
  HELIOS_SYNTH_FIELDS(X)
#undef X
}

void SynthConfig::read(const KvConfig& kv, const std::string& prefix) {
  kv.read(prefix + "location_id", location_id);
  kv.read(prefix + "seed", seed);
  kv.read(prefix + "start_year", start_year);
#define X(name) kv.read(prefix + #name, name);
  HELIOS_SYNTH_FIELDS(X)
#undef X
  validate();
}

#undef HELIOS_SYNTH_FIELDS

}  // namespace helios
