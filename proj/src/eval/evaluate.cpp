#include "helios/eval/evaluate.hpp"

#include <fstream>
#include <ostream>

#include <json.hpp>

#include "helios/core/error.hpp"
#include "helios/data/record.hpp"
#include "helios/train/trainer.hpp"

namespace helios {

EvalReport score_predictions(std::span<const double> v_pred, std::span<const double> v_true,
                             std::span<const EnvPoint> env, std::span<const long long> stamps,
                             const PvModuleParams& params) {
  if (v_pred.size() != v_true.size() || env.size() != v_true.size() || stamps.size() != v_true.size()) {
    fail(ErrorCode::dimension, "score_predictions: inputs have different lengths");
  }
  EvalReport r;
  r.n_points = v_true.size();
  for (double v : v_true) r.n_nonzero_points += v > kNonzeroVoltage ? 1 : 0;
  r.map_error_pct = map_error_nonzero(v_pred, v_true);
  const auto eff = mppt_efficiency(v_pred, env, params);
  r.avg_efficiency_pct = eff.avg_pct;
  r.peak_efficiency_pct = eff.peak_pct;
  r.n_daylight_points = eff.n_points;
  const auto baseline = persistence_baseline(v_true);
  r.baseline_map_pct = map_error_nonzero(baseline.v_pred, v_true, kNonzeroVoltage, baseline.valid);
  r.trace.resize(r.n_points);
  for (std::size_t i = 0; i < r.n_points; ++i) {
    r.trace[i] = {stamps[i], v_true[i], v_pred[i], env[i].pmp, eff.p_pred[i]};
  }
  return r;
}

EvalReport evaluate(TransformerModel& model, const FeatureTable& table, std::span<const WindowRef> test,
                    const PvModuleParams& params) {
  const auto v_pred = predict_windows(model, table, test);
  std::vector<double> v_true;
  std::vector<EnvPoint> env;
  std::vector<long long> stamps;
  for (const auto& w : test) {
    const auto& rec = table.data()[w.location].records[w.end];
    v_true.push_back(rec.vmp);
    env.push_back({rec.g_eff, rec.t_cell, rec.pmp, rec.imp, rec.vmp});
    stamps.push_back(hour_stamp(rec));
  }
  return score_predictions(v_pred, v_true, env, stamps, params);
}

void write_trace_csv(std::ostream& out, std::span<const TracePoint> trace, bool filtered) {
  std::vector<double> v(trace.size());
  std::vector<double> p(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    v[i] = trace[i].v_pred;
    p[i] = trace[i].p_pred;
  }
  if (filtered) {
    auto f = high_pass_filter(v, p);
    v = std::move(f.v);
    p = std::move(f.p);
  }
  out << "t,v_true_v,v_pred_v,p_true_w,p_pred_w\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << trace[i].t << ',' << format_double(trace[i].v_true) << ',' << format_double(v[i]) << ','
        << format_double(trace[i].p_true) << ',' << format_double(p[i]) << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TracePoint> trace, bool filtered) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  write_trace_csv(out, trace, filtered);
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["map_error_pct"] = r.map_error_pct;
  j["avg_efficiency_pct"] = r.avg_efficiency_pct;
  j["peak_efficiency_pct"] = r.peak_efficiency_pct;
  j["baseline_map_pct"] = r.baseline_map_pct;
  j["n_points"] = r.n_points;
  j["n_nonzero_points"] = r.n_nonzero_points;
  j["n_daylight_points"] = r.n_daylight_points;
  return j.dump(2) + "\n";
}

}  // namespace helios
