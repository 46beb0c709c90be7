#include "helios/model/config.hpp"

#include <cmath>
#include <sstream>

#include "helios/core/error.hpp"

namespace helios {

std::string to_string(Pooling pooling) { return pooling == Pooling::last ? "last" : "flatten"; }

Pooling parse_pooling(const std::string& text) {
  if (text == "last") return Pooling::last;
  if (text == "flatten") return Pooling::flatten;
  fail(ErrorCode::config, "unknown pooling '" + text + "' (expected last or flatten)");
}

std::size_t ModelConfig::n_categorical() const {
  std::size_t n = 0;
  for (auto c : cat_cardinalities) n += c;
  return n;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::config, "model config: " + what); };
  if (d_eff == 0) bad("d_eff must be positive");
  if (n_heads == 0) bad("n_heads must be positive");
  if (d_eff % n_heads != 0) {
    bad("d_eff " + std::to_string(d_eff) + " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (ff_dim == 0) bad("ff_dim must be positive");
  if (n_blocks == 0) bad("n_blocks must be positive");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) bad("dropout_prob must lie in [0, 1)");
  if (t_window == 0) bad("t_window must be positive");
  if (n_cont == 0) bad("n_cont must be positive");
  for (auto c : cat_cardinalities) {
    if (c == 0) bad("categorical cardinalities must be positive");
  }
  if (!std::isfinite(y_min) || !std::isfinite(y_max) || !(y_max > y_min)) bad("y_max must exceed y_min");
}

void ModelConfig::write(KvConfig& kv, const std::string& prefix) const {
  kv.set(prefix + "d_eff", static_cast<std::uint64_t>(d_eff));
  kv.set(prefix + "n_heads", static_cast<std::uint64_t>(n_heads));
  kv.set(prefix + "ff_dim", static_cast<std::uint64_t>(ff_dim));
  kv.set(prefix + "n_blocks", static_cast<std::uint64_t>(n_blocks));
  kv.set(prefix + "dropout_prob", dropout_prob);
  kv.set(prefix + "t_window", static_cast<std::uint64_t>(t_window));
  kv.set(prefix + "n_cont", static_cast<std::uint64_t>(n_cont));
  std::string cards;
  for (std::size_t i = 0; i < cat_cardinalities.size(); ++i) {
    if (i) cards += ',';
    cards += std::to_string(cat_cardinalities[i]);
  }
  kv.set(prefix + "cat_cardinalities", cards);
  kv.set(prefix + "y_min", y_min);
  kv.set(prefix + "y_max", y_max);
  kv.set(prefix + "pooling", to_string(pooling));
}

void ModelConfig::read(const KvConfig& kv, const std::string& prefix) {
  auto read_size = [&](const char* name, std::size_t& out) {
    std::uint64_t v = out;
    kv.read(prefix + name, v);
    out = static_cast<std::size_t>(v);
  };
  read_size("d_eff", d_eff);
  read_size("n_heads", n_heads);
  read_size("ff_dim", ff_dim);
  read_size("n_blocks", n_blocks);
  kv.read(prefix + "dropout_prob", dropout_prob);
  read_size("t_window", t_window);
  read_size("n_cont", n_cont);
  if (kv.has(prefix + "cat_cardinalities")) {
    std::istringstream in(kv.get_string(prefix + "cat_cardinalities"));
    cat_cardinalities.clear();
    std::string item;
    while (std::getline(in, item, ',')) {
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(item, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != item.size()) fail(ErrorCode::config, "bad cardinality '" + item + "'");
      cat_cardinalities.push_back(static_cast<std::size_t>(v));
    }
  }
  kv.read(prefix + "y_min", y_min);
  kv.read(prefix + "y_max", y_max);
  if (kv.has(prefix + "pooling")) pooling = parse_pooling(kv.get_string(prefix + "pooling"));
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_eff;
  const std::size_t ff = cfg.ff_dim;
  const std::size_t per_block = 4 * d * d + 2 * 2 * d + d * ff + ff + ff * d + d;
  const std::size_t head_in = cfg.pooling == Pooling::last ? d : cfg.t_window * d;
  return cfg.n_cont * d + cfg.d_adj() * d + cfg.t_window * d + cfg.n_blocks * per_block + head_in + 1;
}

}  // namespace helios
