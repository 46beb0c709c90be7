#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "helios/core/error.hpp"
#include "helios/core/grad_check.hpp"
#include "helios/model/checkpoint.hpp"
#include "helios/model/config.hpp"
#include "helios/model/transformer.hpp"

namespace helios {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::io;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_eff = 8;
  c.n_heads = 2;
  c.ff_dim = 12;
  c.n_blocks = 2;
  c.t_window = 4;
  c.dropout_prob = 0.0;
  c.y_min = 10.0;
  c.y_max = 40.0;
  return c;
}

struct RandomInputs {
  Tensor x_cont, x_cat, mask;
};

RandomInputs random_inputs(const ModelConfig& c, std::size_t b, RngStream& rng) {
  RandomInputs in{Tensor({b, c.t_window, c.n_cont}), Tensor({b, c.t_window, c.n_categorical()}),
                  Tensor({b, c.t_window}, 1.0)};
  for (double& v : in.x_cont.data()) v = rng.uniform(-0.2, 1.2);
  for (std::size_t i = 0; i < b * c.t_window; ++i) {
    std::size_t base = 0;
    for (auto card : c.cat_cardinalities) {
      in.x_cat.data()[i * c.n_categorical() + base + rng.below(card)] = 1.0;
      base += card;
    }
  }
  return in;
}

void randomize(Tensor& t, RngStream& rng, double scale) {
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
}

TEST(Config, AdjustedWidthMatchesTable) {
  const std::pair<std::size_t, std::size_t> table[] = {{32, 68}, {64, 100}, {128, 164}, {256, 292}, {512, 548}};
  for (auto [d, adj] : table) {
    ModelConfig c;
    c.d_eff = d;
    EXPECT_EQ(c.d_adj(), adj);
    EXPECT_EQ(c.d_adj() - c.d_eff, 36u);
  }
}

TEST(Config, HeadDivisibilityAndRanges) {
  ModelConfig c;
  c.d_eff = 256;
  c.n_heads = 16;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.head_dim(), 16u);
  c.n_heads = 12;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::config);
  c = ModelConfig{};
  c.y_max = c.y_min;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::config);
  c = ModelConfig{};
  c.dropout_prob = 1.0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::config);
  RngStream rng(1);
  c = ModelConfig{};
  c.n_heads = 3;
  EXPECT_EQ(code_of([&] { init_model(c, rng); }), ErrorCode::config);
}

TEST(Config, KvRoundTrip) {
  ModelConfig c = tiny_config();
  c.pooling = Pooling::flatten;
  c.cat_cardinalities = {3, 5, 7};
  KvConfig kv;
  c.write(kv);
  std::istringstream in(kv.to_string());
  const KvConfig back = KvConfig::parse(in);
  ModelConfig d;
  d.read(back);
  back.require_all_consumed();
  EXPECT_EQ(c, d);
}

TEST(Init, ParameterCountMatchesClosedForm) {
  for (auto pooling : {Pooling::last, Pooling::flatten})
    for (std::size_t d : {8, 32, 64}) {
      ModelConfig c;
      c.d_eff = d;
      c.n_heads = 4;
      c.ff_dim = 3 * d;
      c.pooling = pooling;
      RngStream rng(2);
      const auto m = init_model(c, rng);
      std::size_t counted = 0;
      for (const auto& p : m.parameters()) counted += p.tensor.numel();
      EXPECT_EQ(counted, parameter_count(c));
      EXPECT_EQ(m.parameter_count(), parameter_count(c));
      // Independent tally of the same architecture.
      const std::size_t n = 36, t = c.t_window, f = c.ff_dim;
      const std::size_t head_in = pooling == Pooling::last ? d : t * d;
      const std::size_t expect =
          8 * d + (d + n) * d + t * d + 3 * (4 * d * d + 2 * d + d * f + f + f * d + d + 2 * d) + head_in + 1;
      EXPECT_EQ(parameter_count(c), expect);
    }
}

TEST(Init, DeterministicAndWithinBounds) {
  const ModelConfig c = tiny_config();
  RngStream a(7), b(7), other(8);
  const auto ma = init_model(c, a);
  const auto mb = init_model(c, b);
  const auto mc = init_model(c, other);
  const auto pa = ma.parameters(), pb = mb.parameters(), pc = mc.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    for (std::size_t k = 0; k < pa[i].tensor.numel(); ++k) {
      EXPECT_EQ(pa[i].tensor.data()[k], pb[i].tensor.data()[k]);
      any_diff |= pa[i].tensor.data()[k] != pc[i].tensor.data()[k];
    }
    const auto& t = pa[i].tensor;
    const std::string& name = pa[i].name;
    if (name.find("gamma") != std::string::npos) {
      for (double v : t.data()) EXPECT_EQ(v, 1.0);
    } else if (name.find("beta") != std::string::npos) {
      for (double v : t.data()) EXPECT_EQ(v, 0.0);
    } else if (t.rank() == 2 && name != "pos_enc") {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
      for (double v : t.data()) EXPECT_LE(std::abs(v), limit);
    } else {
      for (double v : t.data()) EXPECT_LE(std::abs(v), 0.02);
    }
  }
  EXPECT_TRUE(any_diff);
  for (const auto& b : ma.blocks) {
    for (double v : b.norm1.running_mean) EXPECT_EQ(v, 0.0);
    for (double v : b.norm1.running_var) EXPECT_EQ(v, 1.0);
  }
}

TEST(Embed, OneHotSelectsEmbeddingRow) {
  const ModelConfig c = tiny_config();
  RngStream rng(3);
  auto m = init_model(c, rng);
  for (double& v : m.cont_proj.data()) v = 0.0;
  for (double& v : m.pos_enc.data()) v = 0.0;
  const std::size_t d = c.d_eff;
  for (std::size_t k = 0; k < 36; ++k) {
    Tensor x_cont({1, c.t_window, c.n_cont}, 0.7);
    Tensor x_cat({1, c.t_window, 36});
    for (std::size_t t = 0; t < c.t_window; ++t) x_cat.at({0, t, k}) = 1.0;
    const Tensor e = embed_inputs(x_cont, x_cat, m);
    ASSERT_EQ(e.shape(), (Shape{1, c.t_window, d}));
    for (std::size_t t = 0; t < c.t_window; ++t)
      for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(e.at({0, t, j}), m.unified_proj.at({d + k, j}));
  }
}

TEST(Embed, TwoCategoriesAddTheirRows) {
  const ModelConfig c = tiny_config();
  RngStream rng(4);
  auto m = init_model(c, rng);
  for (double& v : m.cont_proj.data()) v = 0.0;
  for (double& v : m.pos_enc.data()) v = 0.0;
  const std::size_t d = c.d_eff;
  Tensor x_cont({1, c.t_window, c.n_cont});
  Tensor x_cat({1, c.t_window, 36});
  x_cat.at({0, 2, 4}) = 1.0;
  x_cat.at({0, 2, 12 + 17}) = 1.0;
  const Tensor e = embed_inputs(x_cont, x_cat, m);
  for (std::size_t j = 0; j < d; ++j)
    EXPECT_NEAR(e.at({0, 2, j}), m.unified_proj.at({d + 4, j}) + m.unified_proj.at({d + 29, j}), 1e-15);
}

TEST(Embed, FullPipelineMatchesStagedOracle) {
  const ModelConfig c = tiny_config();
  RngStream rng(5);
  const auto m = init_model(c, rng);
  const auto in = random_inputs(c, 3, rng);
  const Tensor e = embed_inputs(in.x_cont, in.x_cat, m);
  const std::size_t d = c.d_eff;
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t t = 0; t < c.t_window; ++t) {
      std::vector<double> z(d + 36);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t f = 0; f < c.n_cont; ++f) z[j] += in.x_cont.at({b, t, f}) * m.cont_proj.at({f, j});
      for (std::size_t k = 0; k < 36; ++k) z[d + k] = in.x_cat.at({b, t, k});
      for (std::size_t j = 0; j < d; ++j) {
        double s = m.pos_enc.at({t, j});
        for (std::size_t r = 0; r < d + 36; ++r) s += z[r] * m.unified_proj.at({r, j});
        EXPECT_NEAR(e.at({b, t, j}), s, 1e-12);
      }
    }
}

TEST(Embed, ShapeMismatchIsDimensionError) {
  const ModelConfig c = tiny_config();
  RngStream rng(6);
  const auto m = init_model(c, rng);
  EXPECT_EQ(code_of([&] { embed_inputs(Tensor({1, 4, 7}), Tensor({1, 4, 36}), m); }), ErrorCode::dimension);
  EXPECT_EQ(code_of([&] { embed_inputs(Tensor({1, 4, 8}), Tensor({1, 4, 35}), m); }), ErrorCode::dimension);
  EXPECT_EQ(code_of([&] { embed_inputs(Tensor({1, 5, 8}), Tensor({1, 5, 36}), m); }), ErrorCode::dimension);
}

TEST(Attention, SingleKeyIdentityProjections) {
  ModelConfig c = tiny_config();
  c.d_eff = 4;
  c.t_window = 1;
  RngStream rng(7);
  auto m = init_model(c, rng);
  auto& blk = m.blocks[0];
  for (Tensor* w : {&blk.w_q, &blk.w_k, &blk.w_v, &blk.w_o}) *w = Tensor::identity(4);
  Tensor x({2, 1, 4});
  randomize(x, rng, 1.0);
  const Tensor y = multi_head_attention(x, Tensor({2, 1}, 1.0), blk, 2);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(y.data()[i], x.data()[i], 1e-15);
}

// Per-head loop reference for one block's attention.
std::vector<double> naive_attention(const Tensor& x, const Tensor& mask, const EncoderBlock& blk, std::size_t h) {
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2), dh = d / h;
  auto proj = [&](const Tensor& w) {
    std::vector<double> out(b * t * d);
    for (std::size_t i = 0; i < b * t; ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) out[i * d + j] += x.data()[i * d + k] * w.at({k, j});
    return out;
  };
  const auto q = proj(blk.w_q), k = proj(blk.w_k), v = proj(blk.w_v);
  std::vector<double> concat(b * t * d);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t hi = 0; hi < h; ++hi)
      for (std::size_t i = 0; i < t; ++i) {
        std::vector<double> s(t);
        double mx = -1e300;
        for (std::size_t j = 0; j < t; ++j) {
          for (std::size_t c = 0; c < dh; ++c)
            s[j] += q[(bi * t + i) * d + hi * dh + c] * k[(bi * t + j) * d + hi * dh + c];
          s[j] /= std::sqrt(static_cast<double>(dh));
          if (mask.at({bi, j}) == 0.0) s[j] += -1e9;
          mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (auto& e : s) z += (e = std::exp(e - mx));
        for (std::size_t c = 0; c < dh; ++c) {
          double acc = 0;
          for (std::size_t j = 0; j < t; ++j) acc += s[j] / z * v[(bi * t + j) * d + hi * dh + c];
          concat[(bi * t + i) * d + hi * dh + c] = acc;
        }
      }
  std::vector<double> out(b * t * d);
  for (std::size_t i = 0; i < b * t; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k2 = 0; k2 < d; ++k2) out[i * d + j] += concat[i * d + k2] * blk.w_o.at({k2, j});
  return out;
}

TEST(Attention, MatchesNaivePerHeadReference) {
  ModelConfig c = tiny_config();
  c.d_eff = 4;
  c.t_window = 3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RngStream rng(seed);
    auto m = init_model(c, rng);
    Tensor x({1, 3, 4});
    randomize(x, rng, 1.5);
    const Tensor mask({1, 3}, 1.0);
    const Tensor y = multi_head_attention(x, mask, m.blocks[0], 2);
    const auto ref = naive_attention(x, mask, m.blocks[0], 2);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-10);
  }
}

TEST(Attention, MaskedKeysGetNoWeightAndRowsSumToOne) {
  ModelConfig c = tiny_config();
  c.t_window = 5;
  RngStream rng(9);
  auto m = init_model(c, rng);
  Tensor x({2, 5, 8});
  randomize(x, rng, 2.0);
  Tensor mask({2, 5}, 1.0);
  mask.at({1, 0}) = 0.0;
  mask.at({1, 3}) = 0.0;
  Tensor att;
  const Tensor y = multi_head_attention(x, mask, m.blocks[0], 2, &att);
  ASSERT_EQ(att.shape(), (Shape{2, 2, 5, 5}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t i = 0; i < 5; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 5; ++j) s += att.at({b, h, i, j});
        EXPECT_NEAR(s, 1.0, 1e-9);
        if (b == 1) {
          EXPECT_LT(att.at({b, h, i, 0}), 1e-300);
          EXPECT_LT(att.at({b, h, i, 3}), 1e-300);
        }
      }
  const auto ref = naive_attention(x, mask, m.blocks[0], 2);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-10);
}

TEST(Attention, AllKeysMaskedIsMaskingError) {
  const ModelConfig c = tiny_config();
  RngStream rng(10);
  auto m = init_model(c, rng);
  Tensor mask({2, 4}, 1.0);
  for (std::size_t t = 0; t < 4; ++t) mask.at({1, t}) = 0.0;
  EXPECT_EQ(code_of([&] { multi_head_attention(Tensor({2, 4, 8}), mask, m.blocks[0], 2); }), ErrorCode::masking);
}

TEST(EncoderBlock, ZeroResidualBranchesPassThroughNorms) {
  ModelConfig c = tiny_config();
  RngStream rng(11);
  auto m = init_model(c, rng);
  auto& blk = m.blocks[0];
  for (double& v : blk.w_o.data()) v = 0.0;
  for (double& v : blk.ffn_w2.data()) v = 0.0;
  for (double& v : blk.ffn_b2.data()) v = 0.0;
  Tensor x({3, 4, 8});
  randomize(x, rng, 3.0);
  const Tensor y = encoder_block(x, Tensor({3, 4}, 1.0), blk, c, Mode::eval, rng);
  ASSERT_EQ(y.shape(), x.shape());
  const double s = 1.0 / (1.0 + BatchNormState::kEps);  // two eval norms with unit running variance
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i] * s, 1e-12);
}

TEST(EncoderBlock, MatchesComposedOracle) {
  ModelConfig c = tiny_config();
  RngStream rng(12);
  auto m = init_model(c, rng);
  auto& blk = m.blocks[0];
  blk.norm1.running_mean.assign(8, 0.1);
  blk.norm2.running_var.assign(8, 2.0);
  Tensor x({2, 4, 8});
  randomize(x, rng, 1.0);
  const Tensor mask({2, 4}, 1.0);
  const Tensor y = encoder_block(x, mask, blk, c, Mode::eval, rng);
  const auto att = naive_attention(x, mask, blk, 2);
  const std::size_t rows = 8, d = 8, f = c.ff_dim;
  std::vector<double> z(rows * d), out(rows * d);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j)
      z[r * d + j] = (x.data()[r * d + j] + att[r * d + j] - blk.norm1.running_mean[j]) /
                         std::sqrt(blk.norm1.running_var[j] + BatchNormState::kEps) * blk.norm1.gamma.data()[j] +
                     blk.norm1.beta.data()[j];
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> hid(f);
    for (std::size_t k = 0; k < f; ++k) {
      double s = blk.ffn_b1.data()[k];
      for (std::size_t j = 0; j < d; ++j) s += z[r * d + j] * blk.ffn_w1.at({j, k});
      hid[k] = std::max(0.0, s);
    }
    for (std::size_t j = 0; j < d; ++j) {
      double s = blk.ffn_b2.data()[j];
      for (std::size_t k = 0; k < f; ++k) s += hid[k] * blk.ffn_w2.at({k, j});
      out[r * d + j] = (z[r * d + j] + s - blk.norm2.running_mean[j]) /
                       std::sqrt(blk.norm2.running_var[j] + BatchNormState::kEps);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(y.data()[i], out[i], 1e-10);
}

TEST(EncoderBlock, DropoutMakesTrainDifferFromEval) {
  ModelConfig c = tiny_config();
  c.dropout_prob = 0.5;
  RngStream rng(13);
  auto m = init_model(c, rng);
  Tensor x({4, 4, 8});
  randomize(x, rng, 1.0);
  const Tensor mask({4, 4}, 1.0);
  // Same batch statistics in both calls: compare two train passes with different masks.
  auto blk_a = m.clone().blocks[0];
  auto blk_b = m.clone().blocks[0];
  RngStream r1(1), r2(2);
  const Tensor a = encoder_block(x, mask, blk_a, c, Mode::train, r1);
  const Tensor b = encoder_block(x, mask, blk_b, c, Mode::train, r2);
  double diff = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff += std::abs(a.data()[i] - b.data()[i]);
  EXPECT_GT(diff, 1e-3);
  const Tensor e1 = encoder_block(x, mask, m.blocks[0], c, Mode::eval, r1);
  const Tensor e2 = encoder_block(x, mask, m.blocks[0], c, Mode::eval, r2);
  for (std::size_t i = 0; i < e1.numel(); ++i) EXPECT_EQ(e1.data()[i], e2.data()[i]);
}

TEST(Head, ScaledSigmoidValuesAndLimits) {
  const Tensor y = scaled_sigmoid(Tensor::vector({0.0, 50.0, -50.0, 1e6, -1e6}), 10.0, 40.0);
  EXPECT_DOUBLE_EQ(y.data()[0], 25.0);
  EXPECT_NEAR(y.data()[1], 40.0, 1e-12);
  EXPECT_NEAR(y.data()[2], 10.0, 1e-12);
  EXPECT_EQ(y.data()[3], y.data()[1]);
  EXPECT_EQ(y.data()[4], y.data()[2]);
  EXPECT_LT(y.data()[1], 40.0 + 1e-12);
  EXPECT_GE(y.data()[2], 10.0);
}

TEST(Forward, OutputsStayInsideVoltageRange) {
  const ModelConfig c = tiny_config();
  RngStream rng(14);
  auto m = init_model(c, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto in = random_inputs(c, 2, rng);
    NoGradScope off;
    const Tensor y = forward(in.x_cont, in.x_cat, in.mask, m, Mode::eval, rng);
    ASSERT_EQ(y.shape(), (Shape{2}));
    for (double v : y.data()) {
      EXPECT_GT(v, c.y_min);
      EXPECT_LT(v, c.y_max);
    }
  }
}

TEST(Forward, FlattenPoolingRuns) {
  ModelConfig c = tiny_config();
  c.pooling = Pooling::flatten;
  RngStream rng(15);
  auto m = init_model(c, rng);
  EXPECT_EQ(m.head_w.dim(0), c.t_window * c.d_eff);
  const auto in = random_inputs(c, 3, rng);
  EXPECT_EQ(forward(in.x_cont, in.x_cat, in.mask, m, Mode::eval, rng).numel(), 3u);
}

TEST(Forward, PermutingBatchPermutesEvalOutputs) {
  const ModelConfig c = tiny_config();
  RngStream rng(16);
  auto m = init_model(c, rng);
  const auto in = random_inputs(c, 5, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  RandomInputs p{Tensor(in.x_cont.shape()), Tensor(in.x_cat.shape()), in.mask};
  const std::size_t sc = c.t_window * c.n_cont, sk = c.t_window * 36;
  for (std::size_t i = 0; i < 5; ++i) {
    std::copy_n(in.x_cont.data().data() + perm[i] * sc, sc, p.x_cont.data().data() + i * sc);
    std::copy_n(in.x_cat.data().data() + perm[i] * sk, sk, p.x_cat.data().data() + i * sk);
  }
  const Tensor y = forward(in.x_cont, in.x_cat, in.mask, m, Mode::eval, rng);
  const Tensor yp = forward(p.x_cont, p.x_cat, p.mask, m, Mode::eval, rng);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(yp.data()[i], y.data()[perm[i]], 1e-12);
}

TEST(Forward, EveryParameterReceivesGradient) {
  const ModelConfig c = tiny_config();
  RngStream rng(17);
  auto m = init_model(c, rng);
  const auto in = random_inputs(c, 4, rng);
  Tape tape;
  {
    TapeScope scope(tape);
    const Tensor y = forward(in.x_cont, in.x_cat, in.mask, m, Mode::train, rng);
    tape.backward(sum(square(add_scalar(y, -20.0))));
  }
  for (const auto& p : m.parameters()) {
    const auto g = p.tensor.grad();
    ASSERT_TRUE(g.has_value()) << p.name;
    bool nonzero = false;
    for (double v : *g) nonzero |= v != 0.0;
    EXPECT_TRUE(nonzero) << p.name;
  }
}

TEST(Forward, TinyModelGradientCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ModelConfig c = tiny_config();
    RngStream rng(seed);
    auto m = init_model(c, rng);
    for (auto& b : m.blocks) {
      for (auto* st : {&b.norm1, &b.norm2}) {
        for (auto& v : st->running_mean) v = rng.uniform(-0.3, 0.3);
        for (auto& v : st->running_var) v = rng.uniform(0.5, 2.0);
      }
    }
    const auto in = random_inputs(c, 3, rng);
    std::vector<Tensor> params;
    for (const auto& p : m.parameters()) params.push_back(p.tensor);
    const auto report = grad_check_tensors(
        [&] {
          RngStream unused(0);
          return mean(square(add_scalar(forward(in.x_cont, in.x_cat, in.mask, m, Mode::eval, unused), -22.0)));
        },
        params, 1e-5);
    EXPECT_LT(report.max_rel_error, 1e-4) << "seed " << seed << " tensor " << report.worst_tensor;
    EXPECT_EQ(report.coordinates, parameter_count(c));
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ModelConfig c = tiny_config();
  RngStream rng(18);
  auto m = init_model(c, rng);
  m.normalizer.min[2] = -1.5;
  m.normalizer.max[2] = 0.1 + 0.2;
  m.normalizer.y_min = c.y_min;
  m.normalizer.y_max = c.y_max;
  m.blocks[1].norm2.running_var[3] = 1.0 / 3.0;
  const auto path = std::filesystem::temp_directory_path() / "helios_model_test.ckpt";
  save_checkpoint(m, path);
  auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.normalizer, m.normalizer);
  const auto pa = m.parameters(), pb = back.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].tensor.shape(), pb[i].tensor.shape());
    EXPECT_EQ(std::memcmp(pa[i].tensor.data().data(), pb[i].tensor.data().data(), pa[i].tensor.numel() * 8), 0);
  }
  EXPECT_EQ(back.blocks[1].norm2.running_var, m.blocks[1].norm2.running_var);
  const auto in = random_inputs(c, 4, rng);
  RngStream r(0);
  const Tensor y1 = forward(in.x_cont, in.x_cat, in.mask, m, Mode::eval, r);
  const Tensor y2 = forward(in.x_cont, in.x_cat, in.mask, back, Mode::eval, r);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y1.data()[i], y2.data()[i]);
  EXPECT_EQ(serialize_checkpoint(m), serialize_checkpoint(back));
}

TEST(Checkpoint, LayoutHeader) {
  RngStream rng(19);
  auto m = init_model(tiny_config(), rng);
  const std::string bytes = serialize_checkpoint(m);
  EXPECT_EQ(bytes.substr(0, 5), "MPTF1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 1u);
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(bytes[7], 0);
  EXPECT_EQ(bytes[8], 0);
}

TEST(Checkpoint, TruncationAndBadMagicAreFormatErrors) {
  RngStream rng(20);
  auto m = init_model(tiny_config(), rng);
  const std::string bytes = serialize_checkpoint(m);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    try {
      deserialize_checkpoint(bytes.substr(0, cut));
      ADD_FAILURE() << "cut " << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::format) << "cut " << cut;
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
  }
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { deserialize_checkpoint(bad); }), ErrorCode::format);
  bad = bytes;
  bad[5] = 2;
  EXPECT_EQ(code_of([&] { deserialize_checkpoint(bad); }), ErrorCode::format);
  EXPECT_EQ(code_of([&] { deserialize_checkpoint(bytes + "x"); }), ErrorCode::format);
  EXPECT_EQ(code_of([] { load_checkpoint("/nonexistent/helios.ckpt"); }), ErrorCode::io);
}

TEST(Checkpoint, ConfigShapeDisagreementIsConsistencyError) {
  RngStream rng(21);
  auto m = init_model(tiny_config(), rng);
  std::string bytes = serialize_checkpoint(m);
  const std::string needle = "ff_dim = 12";
  const auto pos = bytes.find(needle);
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, needle.size(), "ff_dim = 16");
  EXPECT_EQ(code_of([&] { deserialize_checkpoint(bytes); }), ErrorCode::consistency);
}

TEST(Model, CloneIsIndependentAndCopyFromRestores) {
  RngStream rng(22);
  auto m = init_model(tiny_config(), rng);
  auto c = m.clone();
  c.head_b.data()[0] += 1.0;
  c.blocks[0].norm1.running_mean[0] = 5.0;
  EXPECT_NE(c.head_b.data()[0], m.head_b.data()[0]);
  EXPECT_EQ(m.blocks[0].norm1.running_mean[0], 0.0);
  m.copy_from(c);
  EXPECT_EQ(c.head_b.data()[0], m.head_b.data()[0]);
  EXPECT_EQ(m.blocks[0].norm1.running_mean[0], 5.0);
  EXPECT_FALSE(m.head_b.same_storage(c.head_b));
}

}  // namespace
}  // namespace helios
