#include "helios/train/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "helios/core/error.hpp"

namespace helios {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::config, "train config: " + what); };
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(lr_min > 0.0 && lr_min < lr_max)) bad("need 0 < lr_min < lr_max");
  if (!(pct_up > 0.0 && pct_up < 1.0)) bad("pct_up must lie in (0, 1)");
  if (!(mom_trough >= 0.0 && mom_trough < mom_peak && mom_peak < 1.0)) bad("need 0 <= mom_trough < mom_peak < 1");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) bad("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) bad("eps must be positive");
  if (!(grad_clip >= 0.0)) bad("grad_clip must be non-negative");
}

void TrainConfig::write(KvConfig& kv, const std::string& prefix) const {
  kv.set(prefix + "epochs", static_cast<std::uint64_t>(epochs));
  kv.set(prefix + "batch_size", static_cast<std::uint64_t>(batch_size));
  kv.set(prefix + "lr_min", lr_min);
  kv.set(prefix + "lr_max", lr_max);
  kv.set(prefix + "pct_up", pct_up);
  kv.set(prefix + "mom_peak", mom_peak);
  kv.set(prefix + "mom_trough", mom_trough);
  kv.set(prefix + "cycle_momentum", std::string(cycle_momentum ? "true" : "false"));
  kv.set(prefix + "beta2", beta2);
  kv.set(prefix + "eps", eps);
  kv.set(prefix + "grad_clip", grad_clip);
  kv.set(prefix + "seed", seed);
}

void TrainConfig::read(const KvConfig& kv, const std::string& prefix) {
  std::uint64_t n = epochs;
  kv.read(prefix + "epochs", n);
  epochs = static_cast<std::size_t>(n);
  n = batch_size;
  kv.read(prefix + "batch_size", n);
  batch_size = static_cast<std::size_t>(n);
  kv.read(prefix + "lr_min", lr_min);
  kv.read(prefix + "lr_max", lr_max);
  kv.read(prefix + "pct_up", pct_up);
  kv.read(prefix + "mom_peak", mom_peak);
  kv.read(prefix + "mom_trough", mom_trough);
  kv.read(prefix + "cycle_momentum", cycle_momentum);
  kv.read(prefix + "beta2", beta2);
  kv.read(prefix + "eps", eps);
  kv.read(prefix + "grad_clip", grad_clip);
  kv.read(prefix + "seed", seed);
}

std::size_t peak_step(const TrainConfig& cfg, std::size_t total_steps) {
  if (total_steps < 2) return 0;
  const auto raw = static_cast<std::size_t>(std::llround(cfg.pct_up * static_cast<double>(total_steps)));
  return std::clamp<std::size_t>(raw, 1, total_steps - 1);
}

ScheduleValue one_cycle_at(std::size_t step, const TrainConfig& cfg, std::size_t total_steps) {
  if (step >= total_steps) {
    fail(ErrorCode::parameter, "schedule step " + std::to_string(step) + " outside [0, " +
                                   std::to_string(total_steps) + ")");
  }
  // rise goes 0 -> 1 over the warm-up and back to 0 by the last step.
  double rise = 0.0;
  const std::size_t peak = peak_step(cfg, total_steps);
  if (total_steps >= 2) {
    if (step <= peak) {
      const double f = static_cast<double>(step) / static_cast<double>(peak);
      rise = 0.5 * (1.0 - std::cos(std::numbers::pi * f));
    } else {
      const double f = static_cast<double>(step - peak) / static_cast<double>(total_steps - 1 - peak);
      rise = 0.5 * (1.0 + std::cos(std::numbers::pi * f));
    }
  }
  ScheduleValue out;
  out.lr = cfg.lr_min + (cfg.lr_max - cfg.lr_min) * rise;
  out.beta1 = cfg.cycle_momentum ? cfg.mom_peak - (cfg.mom_peak - cfg.mom_trough) * rise : kDefaultBeta1;
  return out;
}

double geometric_lr(std::size_t k, std::size_t n, double lo, double hi) {
  if (n < 2) return lo;
  return lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n - 1));
}

}  // namespace helios
