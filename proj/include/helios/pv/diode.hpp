#pragma once

#include <string>

#include "helios/data/record.hpp"
#include "helios/pv/kv_config.hpp"
#include "helios/pv/solar.hpp"
#include "helios/pv/weather.hpp"

namespace helios {

/// Single-diode module description plus mounting and thermal constants.
struct PvModuleParams {
  double isc_ref = 7.95;   // A at STC
  double voc_ref = 37.2;   // V at STC
  double n_ideality = 1.1;
  double rs = 0.3;    // ohm
  double rsh = 300.0;  // ohm
  int ns_cells = 60;
  double alpha_isc = 0.0005 * 7.95;  // A/degC
  double eg = 1.121;                 // eV
  double faiman_u0 = 25.0;           // W/m^2K
  double faiman_u1 = 6.84;           // W s/m^3K
  double tilt = 20.0;                // deg
  double azimuth = 180.0;            // deg from north

  void validate() const;
  void write(KvConfig& kv, const std::string& prefix = "module.") const;
  void read(const KvConfig& kv, const std::string& prefix = "module.");

  friend bool operator==(const PvModuleParams&, const PvModuleParams&) = default;
};

inline constexpr double kRatedPower = 230.0;  // W, nameplate
inline constexpr double kStcIrradiance = 1000.0;
inline constexpr double kStcTemperature = 25.0;

struct OperatingPoint {
  double v = 0.0;
  double i = 0.0;
  double p = 0.0;
};

/// Plane-of-array irradiance on the tilted module after PM10 and humidity
/// derates; values below 1 W/m^2 floor to 0.
double effective_irradiance(const WeatherRecord& ambient, const SolarPosition& pos, const PvModuleParams& params,
                            const SynthConfig& cfg);

/// Faiman model: t_air + g_eff / (u0 + u1 * wind).
double cell_temperature(double t_air, double g_eff, double wind, const PvModuleParams& params);

/// Diode-equation coefficients at one ambient state.
struct DiodeState {
  double iph = 0.0;  // photocurrent, A
  double i0 = 0.0;   // saturation current, A
  double a = 0.0;    // n * Ns * Vt, V
  double rs = 0.0;
  double rsh = 0.0;
};

DiodeState diode_state(double g_eff, double t_cell, const PvModuleParams& params);

/// Terminal current at voltage v >= 0 from the implicit single-diode
/// equation: safeguarded Newton on [0, Iph], |dI| < 1e-9 A, at most 100
/// iterations. Negative solutions clamp to 0.
double iv_current(double v, double g_eff, double t_cell, const PvModuleParams& params);
double iv_current(double v, const DiodeState& state);

double open_circuit_voltage(double g_eff, double t_cell, const PvModuleParams& params);
double short_circuit_current(double g_eff, double t_cell, const PvModuleParams& params);

/// Maximum power point by golden-section search of V * I(V) on [0, Voc]
/// to |dV| < 1e-4 V. Irradiance below 1 W/m^2 returns (0, 0, 0).
OperatingPoint solve_mpp(double g_eff, double t_cell, const PvModuleParams& params);

/// Nameplate targets the module parameters are fitted to.
struct CalibrationTargets {
  double pmp_stc = kRatedPower;  // W
  double pmp_tolerance = 0.02;   // relative
  double fill_factor = 0.778;
  double fill_factor_tolerance = 0.01;
  double gamma_p = -0.0037;  // 1/degC between 25 and 45 degC
  double gamma_p_tolerance = 0.0005;
};

struct CalibrationResult {
  PvModuleParams params;
  double pmp_stc = 0.0;
  double fill_factor = 0.0;
  double gamma_p = 0.0;  // 1/degC
  int evaluations = 0;
};

/// Measured (Pmp, FF, gamma_P) of a parameter set at STC and 45 degC.
CalibrationResult measure_module(const PvModuleParams& params);

/// Coordinate descent over (n, Rs) from a high-shunt start, widened to Rsh
/// and then to band-gap and alpha_isc only while the targets are missed.
CalibrationResult calibrate_module(const CalibrationTargets& targets = {});

}  // namespace helios
