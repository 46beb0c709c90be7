#include "helios/pv/generate.hpp"

#include <cmath>
#include <cstdio>

#include "helios/core/error.hpp"
#include "helios/core/parallel.hpp"
#include "helios/pv/solar.hpp"

namespace helios {

namespace {
constexpr std::uint64_t kLocationStream = 0x4C4F4353ULL;  // "LOCS"
constexpr std::uint64_t kWeatherStream = 0x57455448ULL;   // "WETH"
}  // namespace

std::vector<SynthConfig> default_locations(std::size_t count, std::uint64_t seed) {
  RngStream rng(seed, kLocationStream);
  std::vector<SynthConfig> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SynthConfig c;
    char id[32];
    std::snprintf(id, sizeof id, "loc%02zu", i);
    c.location_id = id;
    c.seed = splitmix64_mix(seed ^ splitmix64_mix(i + 1));
    c.latitude = rng.uniform(8.0, 32.0);
    c.temp_mean = rng.uniform(22.0, 30.0);
    c.temp_seasonal_amp = rng.uniform(2.0, 9.0);
    c.temp_diurnal_amp = rng.uniform(3.5, 7.0);
    c.cloud_mean = rng.uniform(0.15, 0.45);
    c.wind_mean = rng.uniform(1.5, 5.0);
    c.hum_base = rng.uniform(40.0, 70.0);
    c.log_pm_mean = std::log(rng.uniform(40.0, 160.0));
    out.push_back(c);
  }
  return out;
}

LocationSeries generate_location(const SynthConfig& cfg, int years, const PvModuleParams& params) {
  if (years < 1) fail(ErrorCode::parameter, "years must be at least 1");
  cfg.validate();
  params.validate();
  RngStream rng(cfg.seed, kWeatherStream);
  WeatherState state;
  LocationSeries series{cfg.location_id, {}};
  const long long hours = static_cast<long long>(years) * kHoursPerYear;
  series.records.reserve(static_cast<std::size_t>(hours));
  for (long long t = 0; t < hours; ++t) {
    WeatherRecord r = synth_weather_step(state, cfg, t, rng);
    const SolarPosition pos{r.sun_alt, r.sun_azi};
    r.g_eff = effective_irradiance(r, pos, params, cfg);
    r.t_cell = cell_temperature(r.temp_air, r.g_eff, r.wind, params);
    const OperatingPoint op = solve_mpp(r.g_eff, r.t_cell, params);
    r.vmp = op.v;
    r.imp = op.i;
    r.pmp = op.p;
    series.records.push_back(std::move(r));
  }
  return series;
}

Dataset generate_dataset(std::span<const SynthConfig> locations, int years, const PvModuleParams& params) {
  if (locations.empty()) fail(ErrorCode::parameter, "at least one location is required");
  Dataset data(locations.size());
  parallel_for(locations.size(), 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) data[i] = generate_location(locations[i], years, params);
  });
  return data;
}

}  // namespace helios
