#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "helios/core/rng.hpp"
#include "helios/core/tensor.hpp"
#include "helios/data/windows.hpp"
#include "helios/model/transformer.hpp"
#include "helios/pv/diode.hpp"
#include "helios/train/adam.hpp"
#include "helios/train/schedule.hpp"

namespace helios {

/// Mean squared error between equal-length rank-1 tensors.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Forward, backward, optional clipping and one Adam update. Returns the
/// batch loss; a non-finite loss throws ErrorCode::divergence naming `step`
/// and the learning rate before any parameter changes.
double train_step(TransformerModel& model, const WindowBatch& batch, AdamState& state, const TrainConfig& cfg,
                  const ScheduleValue& schedule, RngStream& dropout_rng, std::size_t step = 0);

/// Eval-mode predictions for `windows`, in order.
std::vector<double> predict_windows(TransformerModel& model, const FeatureTable& table,
                                    std::span<const WindowRef> windows, std::size_t batch_size = 256);

struct LrFinderRow {
  double lr = 0.0;
  double loss = 0.0;  // bias-corrected exponential average
};

/// Learning-rate range test on a private copy of `model`: lr grows
/// geometrically from lr_lo to lr_hi over `steps` batches, stopping early
/// once the smoothed loss exceeds four times its best value.
std::vector<LrFinderRow> lr_range_test(const TransformerModel& model, const FeatureTable& table,
                                       std::span<const WindowRef> windows, const TrainConfig& cfg, std::size_t steps,
                                       double lr_lo = 1e-6, double lr_hi = 1e-2);
void write_lr_csv(std::ostream& out, std::span<const LrFinderRow> rows);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_map_pct = 0.0;  // NaN without validation windows
  double val_eff_pct = 0.0;
  double lr_last = 0.0;
};

/// One JSON object per line; NaN is written as null.
std::string to_json_line(const EpochMetrics& m);

struct FitResult {
  std::vector<EpochMetrics> log;
  std::size_t best_epoch = 0;  // 0 when nothing was trained
};

/// Mini-batch training with the one-cycle schedule over epochs *
/// ceil(#train / B) steps. After every epoch the validation windows are
/// scored; the parameters of the epoch with the lowest validation MAP error
/// are restored at the end.
FitResult fit(TransformerModel& model, const FeatureTable& table, std::span<const WindowRef> train,
              std::span<const WindowRef> val, const TrainConfig& cfg, const PvModuleParams& params,
              const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace helios
