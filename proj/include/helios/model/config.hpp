#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "helios/pv/kv_config.hpp"

namespace helios {

/// How the encoder output is reduced to one value per window.
enum class Pooling { last, flatten };

std::string to_string(Pooling pooling);
Pooling parse_pooling(const std::string& text);

struct ModelConfig {
  std::size_t d_eff = 64;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 128;
  std::size_t n_blocks = 3;
  double dropout_prob = 0.2;
  std::size_t t_window = 50;
  std::size_t n_cont = 8;
  std::vector<std::size_t> cat_cardinalities{12, 24};
  double y_min = 0.0;
  double y_max = 1.0;
  Pooling pooling = Pooling::last;

  std::size_t n_categorical() const;
  /// Width after the one-hot columns are appended: d_eff + n_categorical().
  std::size_t d_adj() const { return d_eff + n_categorical(); }
  std::size_t head_dim() const { return d_eff / n_heads; }

  /// Throws ErrorCode::config on any violated invariant.
  void validate() const;

  void write(KvConfig& kv, const std::string& prefix = "model.") const;
  void read(const KvConfig& kv, const std::string& prefix = "model.");

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Closed-form count of trainable scalars (batch-norm running statistics excluded).
std::size_t parameter_count(const ModelConfig& cfg);

}  // namespace helios
