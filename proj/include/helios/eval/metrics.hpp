#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "helios/data/windows.hpp"
#include "helios/pv/diode.hpp"

namespace helios {

inline constexpr double kNonzeroVoltage = 0.5;     // V
inline constexpr double kDaylightPowerShare = 0.01;  // of rated power
inline constexpr double kRippleThreshold = 0.02;     // of rated power

/// Mean absolute percentage error over points whose true voltage exceeds
/// eps_v. `valid`, when non-empty, excludes points flagged 0.
double map_error_nonzero(std::span<const double> v_pred, std::span<const double> v_true,
                         double eps_v = kNonzeroVoltage, std::span<const std::uint8_t> valid = {});

struct EfficiencyResult {
  double avg_pct = 0.0;
  double peak_pct = 0.0;
  std::size_t n_points = 0;          // qualifying daylight points
  std::vector<double> p_pred;        // operating power at every input point
};

/// Power drawn when operating at v_pred on the true I-V curve, relative to
/// the true maximum, over points with pmp above share * rated power.
EfficiencyResult mppt_efficiency(std::span<const double> v_pred, std::span<const EnvPoint> env,
                                 const PvModuleParams& params, double share = kDaylightPowerShare);

struct FilteredTrace {
  std::vector<double> v;
  std::vector<double> p;
};

/// Zeroes (v, p) wherever p < theta * p_rated.
FilteredTrace high_pass_filter(std::span<const double> v_pred, std::span<const double> p_pred,
                               double theta = kRippleThreshold, double p_rated = kRatedPower);

struct PersistenceForecast {
  std::vector<double> v_pred;
  std::vector<std::uint8_t> valid;  // the first point has no predecessor
};

/// Predicts each hour's voltage as the previous hour's truth.
PersistenceForecast persistence_baseline(std::span<const double> v_true);

}  // namespace helios
