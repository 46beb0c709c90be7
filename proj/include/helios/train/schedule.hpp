#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "helios/pv/kv_config.hpp"

namespace helios {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double lr_min = 1e-6;
  double lr_max = 1e-2;
  double pct_up = 0.3;
  double mom_peak = 0.1;
  double mom_trough = 0.01;
  bool cycle_momentum = true;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  std::uint64_t seed = 0;

  void validate() const;
  void write(KvConfig& kv, const std::string& prefix = "train.") const;
  void read(const KvConfig& kv, const std::string& prefix = "train.");
};

/// Adam beta1 when momentum cycling is switched off.
inline constexpr double kDefaultBeta1 = 0.9;

struct ScheduleValue {
  double lr = 0.0;
  double beta1 = 0.0;
};

/// Step at which the learning rate peaks: round(pct_up * total), kept inside
/// [1, total - 1] so both phases exist whenever total >= 2.
std::size_t peak_step(const TrainConfig& cfg, std::size_t total_steps);

/// One-cycle policy: cosine lr_min -> lr_max up to the peak, cosine back to
/// lr_min at the last step; beta1 moves in anti-phase mom_peak -> mom_trough
/// -> mom_peak.
ScheduleValue one_cycle_at(std::size_t step, const TrainConfig& cfg, std::size_t total_steps);

/// Geometric grid point k of n between lo and hi.
double geometric_lr(std::size_t k, std::size_t n, double lo, double hi);

}  // namespace helios
