#include "helios/cli/run_config.hpp"

#include "helios/core/error.hpp"
#include "helios/pv/generate.hpp"

namespace helios {

std::filesystem::path RunConfig::data() const { return data_path.empty() ? out_dir / "dataset.csv" : data_path; }

std::filesystem::path RunConfig::checkpoint() const {
  return checkpoint_path.empty() ? out_dir / "model.ckpt" : checkpoint_path;
}

RunConfig RunConfig::from_kv(const KvConfig& kv) {
  RunConfig c;
  kv.read("seed", c.seed);
  std::string path = c.out_dir.string();
  kv.read("out", path);
  c.out_dir = path;
  path.clear();
  kv.read("data", path);
  c.data_path = path;
  path.clear();
  kv.read("checkpoint", path);
  c.checkpoint_path = path;

  std::uint64_t n = c.locations;
  kv.read("locations", n);
  c.locations = static_cast<std::size_t>(n);
  kv.read("years", c.years);
  n = c.holdout_hours;
  kv.read("holdout_hours", n);
  c.holdout_hours = static_cast<std::size_t>(n);
  n = c.val_hours;
  kv.read("val_hours", n);
  c.val_hours = static_cast<std::size_t>(n);
  n = c.lr_find_steps;
  kv.read("lr_find.steps", n);
  c.lr_find_steps = static_cast<std::size_t>(n);
  kv.read("lr_find.lr_lo", c.lr_find_lo);
  kv.read("lr_find.lr_hi", c.lr_find_hi);

  kv.read("module.calibrate", c.calibrate);
  c.module.read(kv, "module.");
  c.sites = default_locations(c.locations, c.seed);
  for (std::size_t i = 0; i < c.sites.size(); ++i) c.sites[i].read(kv, "location." + std::to_string(i) + ".");
  c.model.read(kv, "model.");
  c.train.read(kv, "train.");
  c.train.seed = c.seed;
  kv.require_all_consumed();

  if (c.years < 1) fail(ErrorCode::config, "years must be at least 1");
  if (c.locations < 1) fail(ErrorCode::config, "locations must be at least 1");
  c.module.validate();
  for (const auto& s : c.sites) s.validate();
  c.model.validate();
  c.train.validate();
  return c;
}

KvConfig RunConfig::to_kv() const {
  KvConfig kv;
  kv.set("seed", seed);
  kv.set("out", out_dir.string());
  kv.set("data", data().string());
  kv.set("checkpoint", checkpoint().string());
  kv.set("locations", static_cast<std::uint64_t>(locations));
  kv.set("years", years);
  kv.set("holdout_hours", static_cast<std::uint64_t>(holdout_hours));
  kv.set("val_hours", static_cast<std::uint64_t>(val_hours));
  kv.set("lr_find.steps", static_cast<std::uint64_t>(lr_find_steps));
  kv.set("lr_find.lr_lo", lr_find_lo);
  kv.set("lr_find.lr_hi", lr_find_hi);
  kv.set("module.calibrate", std::string(calibrate ? "true" : "false"));
  module.write(kv, "module.");
  model.write(kv, "model.");
  train.write(kv, "train.");
  return kv;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& config_file, const FlagOverrides& flags) {
  KvConfig kv = config_file ? KvConfig::load(*config_file) : KvConfig{};
  if (flags.seed) kv.set("seed", *flags.seed);
  if (flags.out) kv.set("out", *flags.out);
  if (flags.data) kv.set("data", *flags.data);
  if (flags.checkpoint) kv.set("checkpoint", *flags.checkpoint);
  if (flags.epochs) kv.set("train.epochs", static_cast<std::uint64_t>(*flags.epochs));
  if (flags.batch_size) kv.set("train.batch_size", static_cast<std::uint64_t>(*flags.batch_size));
  if (flags.d_eff) kv.set("model.d_eff", static_cast<std::uint64_t>(*flags.d_eff));
  if (flags.heads) kv.set("model.n_heads", static_cast<std::uint64_t>(*flags.heads));
  if (flags.ff_dim) kv.set("model.ff_dim", static_cast<std::uint64_t>(*flags.ff_dim));
  if (flags.dropout) kv.set("model.dropout_prob", *flags.dropout);
  if (flags.lr_max) kv.set("train.lr_max", *flags.lr_max);
  if (flags.locations) kv.set("locations", static_cast<std::uint64_t>(*flags.locations));
  if (flags.years) kv.set("years", *flags.years);
  return RunConfig::from_kv(kv);
}

PvModuleParams resolve_module(const RunConfig& cfg) {
  if (!cfg.calibrate) return cfg.module;
  // Calibration fits the electrical parameters only; mounting and thermal
  // settings come from the configuration.
  PvModuleParams p = calibrate_module().params;
  p.faiman_u0 = cfg.module.faiman_u0;
  p.faiman_u1 = cfg.module.faiman_u1;
  p.tilt = cfg.module.tilt;
  p.azimuth = cfg.module.azimuth;
  return p;
}

}  // namespace helios
