#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "helios/model/config.hpp"
#include "helios/pv/diode.hpp"
#include "helios/pv/kv_config.hpp"
#include "helios/pv/weather.hpp"
#include "helios/train/schedule.hpp"

namespace helios {

/// Everything a subcommand needs, merged from a key=value file and flags.
///
/// Recognised keys: seed, out, data, checkpoint, locations, years,
/// holdout_hours, val_hours, lr_find.steps, lr_find.lr_lo, lr_find.lr_hi,
/// module.calibrate, module.<field>, location.<i>.<field>, model.<field> and
/// train.<field>. Any other key is an error.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::filesystem::path data_path;        // empty: <out>/dataset.csv
  std::filesystem::path checkpoint_path;  // empty: <out>/model.ckpt
  std::size_t locations = 5;
  int years = 1;
  std::size_t holdout_hours = 200;
  std::size_t val_hours = 200;
  std::size_t lr_find_steps = 100;
  double lr_find_lo = 1e-6;
  double lr_find_hi = 1e-2;
  bool calibrate = true;
  PvModuleParams module;
  std::vector<SynthConfig> sites;
  ModelConfig model;
  TrainConfig train;

  std::filesystem::path data() const;
  std::filesystem::path checkpoint() const;

  /// Consumes every key of `kv` or throws ErrorCode::config.
  static RunConfig from_kv(const KvConfig& kv);
  /// The effective configuration as key=value text.
  KvConfig to_kv() const;
};

/// Flag values; unset flags leave the file value (or the default) in place.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> d_eff;
  std::optional<std::size_t> heads;
  std::optional<std::size_t> ff_dim;
  std::optional<double> dropout;
  std::optional<double> lr_max;
  std::optional<std::size_t> locations;
  std::optional<int> years;
};

RunConfig load_run_config(const std::optional<std::filesystem::path>& config_file, const FlagOverrides& flags);

/// Module parameters for the run: calibrated to the nameplate unless
/// module.calibrate is false.
PvModuleParams resolve_module(const RunConfig& cfg);

}  // namespace helios
