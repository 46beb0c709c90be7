#include "helios/model/transformer.hpp"

#include <cmath>
#include <string>

#include "helios/core/error.hpp"

namespace helios {

namespace {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  t.set_requires_grad();
  return t;
}

Tensor small_uniform(Shape shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-0.02, 0.02);
  t.set_requires_grad();
  return t;
}

BatchNormState clone_norm(const BatchNormState& s) {
  BatchNormState out;
  out.gamma = s.gamma.clone();
  out.beta = s.beta.clone();
  out.running_mean = s.running_mean;
  out.running_var = s.running_var;
  return out;
}

std::string block_name(std::size_t i, const char* leaf) { return "block" + std::to_string(i) + "." + leaf; }

}  // namespace

std::vector<NamedTensor> TransformerModel::parameters() const {
  std::vector<NamedTensor> out{{"cont_proj", cont_proj}, {"unified_proj", unified_proj}, {"pos_enc", pos_enc}};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    out.push_back({block_name(i, "w_q"), b.w_q});
    out.push_back({block_name(i, "w_k"), b.w_k});
    out.push_back({block_name(i, "w_v"), b.w_v});
    out.push_back({block_name(i, "w_o"), b.w_o});
    out.push_back({block_name(i, "norm1.gamma"), b.norm1.gamma});
    out.push_back({block_name(i, "norm1.beta"), b.norm1.beta});
    out.push_back({block_name(i, "ffn_w1"), b.ffn_w1});
    out.push_back({block_name(i, "ffn_b1"), b.ffn_b1});
    out.push_back({block_name(i, "ffn_w2"), b.ffn_w2});
    out.push_back({block_name(i, "ffn_b2"), b.ffn_b2});
    out.push_back({block_name(i, "norm2.gamma"), b.norm2.gamma});
    out.push_back({block_name(i, "norm2.beta"), b.norm2.beta});
  }
  out.push_back({"head_w", head_w});
  out.push_back({"head_b", head_b});
  return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> TransformerModel::buffers() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    out.emplace_back(block_name(i, "norm1.running_mean"), &b.norm1.running_mean);
    out.emplace_back(block_name(i, "norm1.running_var"), &b.norm1.running_var);
    out.emplace_back(block_name(i, "norm2.running_mean"), &b.norm2.running_mean);
    out.emplace_back(block_name(i, "norm2.running_var"), &b.norm2.running_var);
  }
  return out;
}

std::size_t TransformerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

TransformerModel TransformerModel::clone() const {
  TransformerModel m;
  m.config = config;
  m.normalizer = normalizer;
  m.cont_proj = cont_proj.clone();
  m.unified_proj = unified_proj.clone();
  m.pos_enc = pos_enc.clone();
  for (const auto& b : blocks) {
    EncoderBlock c;
    c.w_q = b.w_q.clone();
    c.w_k = b.w_k.clone();
    c.w_v = b.w_v.clone();
    c.w_o = b.w_o.clone();
    c.norm1 = clone_norm(b.norm1);
    c.norm2 = clone_norm(b.norm2);
    c.ffn_w1 = b.ffn_w1.clone();
    c.ffn_b1 = b.ffn_b1.clone();
    c.ffn_w2 = b.ffn_w2.clone();
    c.ffn_b2 = b.ffn_b2.clone();
    m.blocks.push_back(std::move(c));
  }
  m.head_w = head_w.clone();
  m.head_b = head_b.clone();
  return m;
}

void TransformerModel::copy_from(const TransformerModel& other) {
  if (!(config == other.config)) fail(ErrorCode::consistency, "copy_from: model configs differ");
  normalizer = other.normalizer;
  auto dst = parameters();
  const auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto out = dst[i].tensor.data();
    const auto in = src[i].tensor.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
  auto dst_buf = buffers();
  auto src_buf = const_cast<TransformerModel&>(other).buffers();
  for (std::size_t i = 0; i < dst_buf.size(); ++i) *dst_buf[i].second = *src_buf[i].second;
}

TransformerModel init_model(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_eff;
  TransformerModel m;
  m.config = cfg;
  m.cont_proj = xavier(cfg.n_cont, d, rng);
  m.unified_proj = xavier(cfg.d_adj(), d, rng);
  m.pos_enc = small_uniform({cfg.t_window, d}, rng);
  for (std::size_t i = 0; i < cfg.n_blocks; ++i) {
    EncoderBlock b;
    b.w_q = xavier(d, d, rng);
    b.w_k = xavier(d, d, rng);
    b.w_v = xavier(d, d, rng);
    b.w_o = xavier(d, d, rng);
    b.norm1 = BatchNormState(d);
    b.norm2 = BatchNormState(d);
    b.ffn_w1 = xavier(d, cfg.ff_dim, rng);
    b.ffn_b1 = small_uniform({cfg.ff_dim}, rng);
    b.ffn_w2 = xavier(cfg.ff_dim, d, rng);
    b.ffn_b2 = small_uniform({d}, rng);
    m.blocks.push_back(std::move(b));
  }
  const std::size_t head_in = cfg.pooling == Pooling::last ? d : cfg.t_window * d;
  m.head_w = xavier(head_in, 1, rng);
  m.head_b = small_uniform({1}, rng);
  return m;
}

Tensor embed_inputs(const Tensor& x_cont, const Tensor& x_cat, const TransformerModel& model) {
  const auto& cfg = model.config;
  if (x_cont.rank() != 3 || x_cont.dim(2) != cfg.n_cont || x_cont.dim(1) != cfg.t_window) {
    fail(ErrorCode::dimension, "continuous input " + shape_string(x_cont.shape()) + " does not match [B x " +
                                   std::to_string(cfg.t_window) + " x " + std::to_string(cfg.n_cont) + "]");
  }
  if (x_cat.rank() != 3 || x_cat.dim(0) != x_cont.dim(0) || x_cat.dim(1) != x_cont.dim(1) ||
      x_cat.dim(2) != cfg.n_categorical()) {
    fail(ErrorCode::dimension, "categorical input " + shape_string(x_cat.shape()) + " does not match [B x " +
                                   std::to_string(cfg.t_window) + " x " + std::to_string(cfg.n_categorical()) +
                                   "]");
  }
  const Tensor lifted = matmul(x_cont, model.cont_proj);
  const Tensor joined = concat_lastaxis(lifted, x_cat);
  return add(matmul(joined, model.unified_proj), model.pos_enc);
}

Tensor multi_head_attention(const Tensor& x, const Tensor& mask, const EncoderBlock& block, std::size_t n_heads,
                            Tensor* attention) {
  if (x.rank() != 3) fail(ErrorCode::dimension, "attention input must be [B x T x d], got " + shape_string(x.shape()));
  const std::size_t B = x.dim(0);
  const std::size_t T = x.dim(1);
  const std::size_t d = x.dim(2);
  if (n_heads == 0 || d % n_heads != 0) {
    fail(ErrorCode::config, "width " + std::to_string(d) + " not divisible by " + std::to_string(n_heads) + " heads");
  }
  if (mask.shape() != Shape{B, T}) {
    fail(ErrorCode::dimension, "mask " + shape_string(mask.shape()) + " does not match [" + std::to_string(B) +
                                   " x " + std::to_string(T) + "]");
  }
  bool any_masked = false;
  for (std::size_t b = 0; b < B; ++b) {
    bool any_valid = false;
    for (std::size_t t = 0; t < T; ++t) {
      const double m = mask.data()[b * T + t];
      any_valid = any_valid || m != 0.0;
      any_masked = any_masked || m == 0.0;
    }
    if (!any_valid) fail(ErrorCode::masking, "every key of window " + std::to_string(b) + " is masked");
  }

  const std::size_t dh = d / n_heads;
  auto split = [&](const Tensor& t) { return permute(reshape(t, {B, T, n_heads, dh}), {0, 2, 1, 3}); };
  const Tensor q = split(matmul(x, block.w_q));
  const Tensor k = split(matmul(x, block.w_k));
  const Tensor v = split(matmul(x, block.w_v));

  Tensor scores = scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
  if (any_masked) {
    Tensor bias({B, 1, 1, T});
    for (std::size_t i = 0; i < B * T; ++i) bias.data()[i] = mask.data()[i] == 0.0 ? -1e9 : 0.0;
    scores = add(scores, bias);
  }
  const Tensor weights = softmax_lastaxis(scores);
  if (attention) *attention = weights;
  const Tensor context = reshape(permute(matmul(weights, v), {0, 2, 1, 3}), {B, T, d});
  return matmul(context, block.w_o);
}

Tensor encoder_block(const Tensor& x, const Tensor& mask, EncoderBlock& block, const ModelConfig& cfg, Mode mode,
                     RngStream& rng) {
  const double p_keep = 1.0 - cfg.dropout_prob;
  const Tensor attn = multi_head_attention(x, mask, block, cfg.n_heads);
  const Tensor z = batch_norm(add(x, dropout(attn, p_keep, mode, rng)), block.norm1, mode);
  const Tensor inner = relu(add(matmul(z, block.ffn_w1), block.ffn_b1));
  const Tensor ffn = add(matmul(inner, block.ffn_w2), block.ffn_b2);
  return batch_norm(add(z, dropout(ffn, p_keep, mode, rng)), block.norm2, mode);
}

Tensor scaled_sigmoid(const Tensor& raw, double y_min, double y_max) {
  return add_scalar(scale(sigmoid(clamp(raw, -50.0, 50.0)), y_max - y_min), y_min);
}

Tensor forward(const Tensor& x_cont, const Tensor& x_cat, const Tensor& mask, TransformerModel& model, Mode mode,
               RngStream& rng) {
  const auto& cfg = model.config;
  Tensor h = embed_inputs(x_cont, x_cat, model);
  for (auto& block : model.blocks) h = encoder_block(h, mask, block, cfg, mode, rng);
  const std::size_t B = h.dim(0);
  const Tensor pooled = cfg.pooling == Pooling::last ? select(h, 1, cfg.t_window - 1)
                                                     : reshape(h, {B, cfg.t_window * cfg.d_eff});
  const Tensor raw = reshape(add(matmul(pooled, model.head_w), model.head_b), {B});
  return scaled_sigmoid(raw, cfg.y_min, cfg.y_max);
}

Tensor forward(const WindowBatch& batch, TransformerModel& model, Mode mode, RngStream& rng) {
  return forward(batch.x_cont, batch.x_cat, batch.mask, model, mode, rng);
}

std::vector<double> predict(const WindowBatch& batch, TransformerModel& model) {
  NoGradScope no_grad;
  RngStream unused(0);
  const Tensor y = forward(batch, model, Mode::eval, unused);
  return {y.data().begin(), y.data().end()};
}

}  // namespace helios
