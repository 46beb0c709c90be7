#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "helios/data/windows.hpp"
#include "helios/eval/metrics.hpp"
#include "helios/model/transformer.hpp"
#include "helios/pv/diode.hpp"

namespace helios {

struct TracePoint {
  long long t = 0;  // hour stamp of the window's final record
  double v_true = 0.0;
  double v_pred = 0.0;
  double p_true = 0.0;
  double p_pred = 0.0;
};

struct EvalReport {
  double map_error_pct = 0.0;
  double avg_efficiency_pct = 0.0;
  double peak_efficiency_pct = 0.0;
  double baseline_map_pct = 0.0;
  std::size_t n_points = 0;
  std::size_t n_nonzero_points = 0;
  std::size_t n_daylight_points = 0;  // points entering the efficiency average
  std::vector<TracePoint> trace;      // unfiltered
};

/// Scores predictions for time-ordered test windows against the truth and
/// against the persistence baseline.
EvalReport score_predictions(std::span<const double> v_pred, std::span<const double> v_true,
                             std::span<const EnvPoint> env, std::span<const long long> stamps,
                             const PvModuleParams& params);

/// Eval-mode forward over the test windows followed by score_predictions.
EvalReport evaluate(TransformerModel& model, const FeatureTable& table, std::span<const WindowRef> test,
                    const PvModuleParams& params);

/// CSV `t,v_true_v,v_pred_v,p_true_w,p_pred_w`. With `filtered`, predicted
/// points below the ripple threshold are written as zeros.
void write_trace_csv(std::ostream& out, std::span<const TracePoint> trace, bool filtered = true);
void write_trace_csv(const std::filesystem::path& path, std::span<const TracePoint> trace, bool filtered = true);

/// The report's scalar fields as one JSON object.
std::string report_json(const EvalReport& report);

}  // namespace helios
