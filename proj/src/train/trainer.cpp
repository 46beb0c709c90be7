#include "helios/train/trainer.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "helios/core/error.hpp"
#include "helios/data/record.hpp"
#include "helios/eval/metrics.hpp"

namespace helios {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348'5546ULL;  // "SHUF"
constexpr std::uint64_t kDropoutStream = 0x4452'4F50ULL;  // "DROP"
constexpr std::uint64_t kFinderStream = 0x4C52'4644ULL;   // "LRFD"
constexpr double kSmoothing = 0.98;
constexpr double kAbortFactor = 4.0;

double beta1_fixed(const TrainConfig& cfg) { return cfg.cycle_momentum ? cfg.mom_peak : kDefaultBeta1; }

}  // namespace

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.rank() != 1 || pred.shape() != target.shape() || pred.numel() == 0) {
    fail(ErrorCode::dimension, "mse_loss needs equal non-empty vectors, got " + shape_string(pred.shape()) +
                                   " and " + shape_string(target.shape()));
  }
  return mean(square(sub(pred, target)));
}

double train_step(TransformerModel& model, const WindowBatch& batch, AdamState& state, const TrainConfig& cfg,
                  const ScheduleValue& schedule, RngStream& dropout_rng, std::size_t step) {
  Tape tape;
  TapeScope scope(tape);
  const Tensor pred = forward(batch, model, Mode::train, dropout_rng);
  const Tensor loss = mse_loss(pred, batch.target);
  const double value = loss.item();
  if (!std::isfinite(value)) {
    fail(ErrorCode::divergence, "non-finite loss at step " + std::to_string(step) + " (lr " +
                                    format_double(schedule.lr) + ")");
  }
  tape.backward(loss);
  const auto params = model.parameters();
  if (cfg.grad_clip > 0.0) clip_gradients(params, cfg.grad_clip);
  adam_step(params, state, {schedule.lr, schedule.beta1, cfg.beta2, cfg.eps});
  return value;
}

std::vector<double> predict_windows(TransformerModel& model, const FeatureTable& table,
                                    std::span<const WindowRef> windows, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    const auto chunk = windows.subspan(i, std::min(batch_size, windows.size() - i));
    const auto y = predict(table.make_batch(chunk), model);
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

std::vector<LrFinderRow> lr_range_test(const TransformerModel& model, const FeatureTable& table,
                                       std::span<const WindowRef> windows, const TrainConfig& cfg, std::size_t steps,
                                       double lr_lo, double lr_hi) {
  if (steps < 2) fail(ErrorCode::parameter, "lr_range_test needs at least 2 steps");
  if (windows.empty()) fail(ErrorCode::empty_dataset, "lr_range_test has no windows");
  if (!(lr_lo > 0.0 && lr_lo < lr_hi)) fail(ErrorCode::parameter, "lr_range_test needs 0 < lr_lo < lr_hi");

  TransformerModel copy = model.clone();
  AdamState state;
  const RngStream shuffle_root(cfg.seed, kFinderStream);
  RngStream dropout_rng(cfg.seed, kDropoutStream);
  std::vector<std::vector<WindowRef>> plan;
  std::size_t next = 0;
  std::uint64_t pass = 0;

  std::vector<LrFinderRow> rows;
  double average = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < steps; ++k) {
    if (next == plan.size()) {
      RngStream rng = shuffle_root.substream(pass++);
      plan = batches(windows, cfg.batch_size, rng);
      next = 0;
    }
    const ScheduleValue sv{geometric_lr(k, steps, lr_lo, lr_hi), beta1_fixed(cfg)};
    double loss = 0.0;
    try {
      loss = train_step(copy, table.make_batch(plan[next++]), state, cfg, sv, dropout_rng, k);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::divergence) break;
      throw;
    }
    average = kSmoothing * average + (1.0 - kSmoothing) * loss;
    const double smoothed = average / (1.0 - std::pow(kSmoothing, static_cast<double>(k + 1)));
    rows.push_back({sv.lr, smoothed});
    best = std::min(best, smoothed);
    if (smoothed > kAbortFactor * best) break;
  }
  return rows;
}

void write_lr_csv(std::ostream& out, std::span<const LrFinderRow> rows) {
  out << "lr,loss\n";
  for (const auto& r : rows) out << format_double(r.lr) << ',' << format_double(r.loss) << '\n';
}

std::string to_json_line(const EpochMetrics& m) {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = number(m.train_loss);
  j["val_map_pct"] = number(m.val_map_pct);
  j["val_eff_pct"] = number(m.val_eff_pct);
  j["lr_last"] = number(m.lr_last);
  return j.dump();
}

FitResult fit(TransformerModel& model, const FeatureTable& table, std::span<const WindowRef> train,
              std::span<const WindowRef> val, const TrainConfig& cfg, const PvModuleParams& params,
              const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  FitResult result;
  if (cfg.epochs == 0) return result;
  if (train.empty()) fail(ErrorCode::empty_dataset, "no training windows");

  const std::size_t steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;
  const RngStream shuffle_root(cfg.seed, kShuffleStream);
  RngStream dropout_rng(cfg.seed, kDropoutStream);
  AdamState state;

  std::vector<double> val_true;
  std::vector<EnvPoint> val_env;
  if (!val.empty()) {
    for (std::size_t i = 0; i < val.size(); i += 256) {
      const auto b = table.make_batch(val.subspan(i, std::min<std::size_t>(256, val.size() - i)));
      val_true.insert(val_true.end(), b.target.data().begin(), b.target.data().end());
      val_env.insert(val_env.end(), b.env.begin(), b.env.end());
    }
  }

  TransformerModel best;
  double best_map = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream rng = shuffle_root.substream(epoch);
    const auto plan = batches(train, cfg.batch_size, rng);
    double loss_sum = 0.0;
    ScheduleValue sv;
    for (const auto& windows : plan) {
      sv = one_cycle_at(step, cfg, total_steps);
      loss_sum += train_step(model, table.make_batch(windows), state, cfg, sv, dropout_rng, step);
      ++step;
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_sum / static_cast<double>(plan.size());
    m.lr_last = sv.lr;
    m.val_map_pct = std::numeric_limits<double>::quiet_NaN();
    m.val_eff_pct = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      const auto pred = predict_windows(model, table, val);
      try {
        m.val_map_pct = map_error_nonzero(pred, val_true);
        m.val_eff_pct = mppt_efficiency(pred, val_env, params).avg_pct;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::no_daylight) throw;
      }
      if (m.val_map_pct < best_map) {
        best_map = m.val_map_pct;
        best = model.clone();
        result.best_epoch = m.epoch;
      }
    }
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  if (result.best_epoch == 0) {
    result.best_epoch = cfg.epochs;
  } else if (result.best_epoch != cfg.epochs) {
    model.copy_from(best);
  }
  return result;
}

}  // namespace helios
