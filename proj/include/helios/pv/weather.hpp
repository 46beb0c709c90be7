#pragma once

#include <cstdint>
#include <string>

#include "helios/core/rng.hpp"
#include "helios/data/record.hpp"
#include "helios/pv/kv_config.hpp"

namespace helios {

/// Climate of one synthetic location. All AR(1) processes are
/// x_t = mean + ar * (x_{t-1} - mean) + noise * N(0, 1).
struct SynthConfig {
  std::string location_id = "loc00";
  double latitude = 20.0;  // deg
  std::uint64_t seed = 1;
  int start_year = 2019;

  double temp_mean = 26.0;          // degC, annual mean
  double temp_seasonal_amp = 6.0;   // degC, coldest mid-January
  double temp_diurnal_amp = 5.0;    // degC, warmest at 15:00
  double temp_ar = 0.95;
  double temp_noise = 0.5;

  double cloud_mean = 0.3;  // fraction of sky
  double cloud_ar = 0.9;
  double cloud_noise = 0.12;

  double wind_mean = 3.0;  // m/s
  double wind_ar = 0.85;
  double wind_noise = 0.5;

  double hum_base = 55.0;       // %RH
  double hum_cloud_gain = 30.0;  // %RH per unit cloud
  double hum_temp_gain = 1.5;    // %RH per degC above seasonal mean
  double hum_noise = 3.0;

  double log_pm_mean = 4.4;  // ln(ug/m^3)
  double pm_ar = 0.95;
  double pm_noise = 0.12;

  double k_pm = 5e-4;  // irradiance derate per ug/m^3 of PM10
  double k_h = 5e-4;   // irradiance derate per %RH above 50

  void validate() const;
  void write(KvConfig& kv, const std::string& prefix) const;
  void read(const KvConfig& kv, const std::string& prefix);
};

/// AR(1) memory carried from one hour to the next.
struct WeatherState {
  double cloud = 0.0;
  double temp_resid = 0.0;
  double wind_dev = 0.0;
  double log_pm_dev = 0.0;
  bool initialized = false;
};

/// 1361 * 0.7^(AM^0.678), AM = 1 / max(sin(alt), 0.01); zero at or below the horizon.
double clear_sky_dni(double altitude_deg);
/// 0.1 * DNI_clear * sin(alt).
double clear_sky_dhi(double altitude_deg);

/// Ambient fields (calendar, solar geometry, temperature, irradiance, wind,
/// humidity, PM10) of hour `t` counted from 1 January 00:00 of start_year.
/// PV fields are left zero.
WeatherRecord synth_weather_step(WeatherState& state, const SynthConfig& cfg, long long t, RngStream& rng);

}  // namespace helios
