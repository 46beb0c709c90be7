#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "helios/core/ops.hpp"
#include "helios/core/rng.hpp"
#include "helios/core/tensor.hpp"
#include "helios/data/features.hpp"
#include "helios/data/windows.hpp"
#include "helios/model/config.hpp"

namespace helios {

struct EncoderBlock {
  Tensor w_q, w_k, w_v, w_o;  // [d x d], no biases
  BatchNormState norm1;
  BatchNormState norm2;
  Tensor ffn_w1, ffn_b1;  // [d x ff], [ff]
  Tensor ffn_w2, ffn_b2;  // [ff x d], [d]
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Encoder-only regressor from a window of weather features to the operating
/// voltage at the window's final hour.
///
/// Copies share parameter storage; use clone() for an independent model.
struct TransformerModel {
  ModelConfig config;
  Normalizer normalizer;
  Tensor cont_proj;     // [n_cont x d]
  Tensor unified_proj;  // [d_adj x d]; rows d.. are the categorical embeddings
  Tensor pos_enc;       // [T x d]
  std::vector<EncoderBlock> blocks;
  Tensor head_w;  // [d x 1], or [T*d x 1] with flatten pooling
  Tensor head_b;  // [1]

  /// Trainable tensors in a fixed order with stable names.
  std::vector<NamedTensor> parameters() const;
  /// Batch-norm running statistics as named references.
  std::vector<std::pair<std::string, std::vector<double>*>> buffers();
  std::size_t parameter_count() const;

  TransformerModel clone() const;
  /// Overwrites every parameter and buffer with `other`'s values (same config).
  void copy_from(const TransformerModel& other);
};

TransformerModel init_model(const ModelConfig& cfg, RngStream& rng);

/// Continuous features are lifted to d, the one-hot columns appended, and the
/// result projected back to d; the positional encoding is then added.
Tensor embed_inputs(const Tensor& x_cont, const Tensor& x_cat, const TransformerModel& model);

/// Scaled dot-product self-attention over `n_heads` heads. mask is [B x T]
/// with 1 for valid keys. When `attention` is non-null it receives the
/// [B x H x T x T] weights.
Tensor multi_head_attention(const Tensor& x, const Tensor& mask, const EncoderBlock& block, std::size_t n_heads,
                            Tensor* attention = nullptr);

/// Post-norm block: z = BN1(x + Drop(MHA(x))), out = BN2(z + Drop(FFN(z))).
Tensor encoder_block(const Tensor& x, const Tensor& mask, EncoderBlock& block, const ModelConfig& cfg, Mode mode,
                     RngStream& rng);

/// (y_max - y_min) * sigmoid(clamp(raw, -50, 50)) + y_min.
Tensor scaled_sigmoid(const Tensor& raw, double y_min, double y_max);

/// Predicted voltage [B] in volts.
Tensor forward(const Tensor& x_cont, const Tensor& x_cat, const Tensor& mask, TransformerModel& model, Mode mode,
               RngStream& rng);
Tensor forward(const WindowBatch& batch, TransformerModel& model, Mode mode, RngStream& rng);

/// Eval-mode forward without recording gradients.
std::vector<double> predict(const WindowBatch& batch, TransformerModel& model);

}  // namespace helios
