#include "helios/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "helios/core/error.hpp"

namespace helios {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorCode::dimension, std::string(what) + ": lengths differ (" + std::to_string(a) + " vs " +
                                   std::to_string(b) + ")");
  }
}

}  // namespace

double map_error_nonzero(std::span<const double> v_pred, std::span<const double> v_true, double eps_v,
                         std::span<const std::uint8_t> valid) {
  require_same_length(v_pred.size(), v_true.size(), "map_error_nonzero");
  if (!valid.empty()) require_same_length(valid.size(), v_true.size(), "map_error_nonzero mask");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < v_true.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    if (!(v_true[i] > eps_v)) continue;
    total += std::abs(v_pred[i] - v_true[i]) / v_true[i];
    ++count;
  }
  if (count == 0) fail(ErrorCode::no_daylight, "no point has a true voltage above " + std::to_string(eps_v) + " V");
  return 100.0 * total / static_cast<double>(count);
}

EfficiencyResult mppt_efficiency(std::span<const double> v_pred, std::span<const EnvPoint> env,
                                 const PvModuleParams& params, double share) {
  require_same_length(v_pred.size(), env.size(), "mppt_efficiency");
  EfficiencyResult out;
  out.p_pred.resize(v_pred.size(), 0.0);
  const double threshold = share * kRatedPower;
  double total = 0.0;
  double peak = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const EnvPoint& e = env[i];
    const double v = std::max(0.0, v_pred[i]);
    if (e.g_eff > 0.0 && v > 0.0) out.p_pred[i] = v * iv_current(v, e.g_eff, e.t_cell, params);
    if (!(e.pmp > threshold)) continue;
    const double eta = out.p_pred[i] / e.pmp;
    total += eta;
    peak = out.n_points == 0 ? eta : std::max(peak, eta);
    ++out.n_points;
  }
  if (out.n_points == 0) {
    fail(ErrorCode::no_daylight, "no point has a maximum power above " + std::to_string(threshold) + " W");
  }
  out.avg_pct = 100.0 * total / static_cast<double>(out.n_points);
  out.peak_pct = 100.0 * peak;
  return out;
}

FilteredTrace high_pass_filter(std::span<const double> v_pred, std::span<const double> p_pred, double theta,
                               double p_rated) {
  require_same_length(v_pred.size(), p_pred.size(), "high_pass_filter");
  if (!(theta >= 0.0 && theta < 1.0)) fail(ErrorCode::parameter, "filter threshold must lie in [0, 1)");
  FilteredTrace out{{v_pred.begin(), v_pred.end()}, {p_pred.begin(), p_pred.end()}};
  const double cut = theta * p_rated;
  for (std::size_t i = 0; i < out.p.size(); ++i) {
    if (out.p[i] < cut) {
      out.v[i] = 0.0;
      out.p[i] = 0.0;
    }
  }
  return out;
}

PersistenceForecast persistence_baseline(std::span<const double> v_true) {
  PersistenceForecast out;
  out.v_pred.resize(v_true.size());
  out.valid.assign(v_true.size(), 1);
  for (std::size_t i = 0; i < v_true.size(); ++i) out.v_pred[i] = i == 0 ? v_true[0] : v_true[i - 1];
  if (!v_true.empty()) out.valid[0] = 0;
  return out;
}

}  // namespace helios
