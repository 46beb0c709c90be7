#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "helios/cli/run_config.hpp"
#include "helios/data/features.hpp"
#include "helios/data/record.hpp"
#include "helios/data/windows.hpp"
#include "helios/eval/evaluate.hpp"

namespace helios {

/// A dataset with its split, the normalizer fitted on the training part and
/// the feature table built from both. Not movable: the table points into
/// `data`.
struct PreparedData {
  Dataset data;
  DataSplit split;
  Normalizer normalizer;
  std::unique_ptr<FeatureTable> table;

  PreparedData() = default;
  PreparedData(const PreparedData&) = delete;
  PreparedData& operator=(const PreparedData&) = delete;
};

/// Splits by the run seed and fits the normalizer on training records only.
std::unique_ptr<PreparedData> prepare_data(Dataset data, const RunConfig& cfg);

/// Like prepare_data but keeps the given normalizer (e.g. from a checkpoint).
std::unique_ptr<PreparedData> prepare_data(Dataset data, const RunConfig& cfg, const Normalizer& norm);

/// Sweep grids: d_eff, ff_dim, dropout and heads.
std::vector<double> sweep_values(const std::string& axis);

struct SweepRow {
  double value = 0.0;
  std::size_t d_adj = 0;  // 0 when the axis does not change it
  double map_pct = 0.0;
  double avg_eff_pct = 0.0;
};

void write_sweep_csv(std::ostream& out, const std::string& axis, const std::vector<SweepRow>& rows);

// Subcommands. Results go to files under cfg.out_dir and a summary to `out`;
// progress goes to `log`. Each returns the process exit status.
int run_gen_data(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int run_train(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int run_eval(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int run_lr_find(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int run_sweep(const RunConfig& cfg, const std::string& axis, bool small, std::ostream& out, std::ostream& log);
int run_predict(const RunConfig& cfg, std::ostream& out, std::ostream& log);

}  // namespace helios
