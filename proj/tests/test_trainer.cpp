#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "helios/core/error.hpp"
#include "helios/core/grad_check.hpp"
#include "helios/data/features.hpp"
#include "helios/eval/metrics.hpp"
#include "helios/data/windows.hpp"
#include "helios/model/transformer.hpp"
#include "helios/pv/diode.hpp"
#include "helios/pv/generate.hpp"
#include "helios/train/adam.hpp"
#include "helios/train/schedule.hpp"
#include "helios/train/trainer.hpp"

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

void set_grad(Tensor& t, std::span<const double> g) {
  t.set_requires_grad();
  auto buf = t.node()->grad_buffer();
  std::copy(g.begin(), g.end(), buf.begin());
}

// Small labelled dataset: the first `hours` of two generated locations.
struct SmallData {
  Dataset data;
  Normalizer norm;
  std::unique_ptr<FeatureTable> table;
  std::vector<WindowRef> train, val;
  PvModuleParams params;
};

SmallData& small_data() {
  static SmallData* d = [] {
    auto* s = new SmallData;
    s->params = PvModuleParams{};
    s->params.n_ideality = 1.0;
    s->params.rsh = 5000;
    for (auto cfg : default_locations(2, 3)) {
      auto series = generate_location(cfg, 1, s->params);
      series.records.resize(24 * 20);
      s->data.push_back(std::move(series));
    }
    const DataSplit split = split_train_test(s->data, {.seed = 1, .t_window = 6, .holdout_hours = 48, .val_hours = 48});
    s->norm = fit_normalizer(training_records(s->data, split));
    s->table = std::make_unique<FeatureTable>(s->data, s->norm, 6);
    s->train = split.train;
    s->val = split.val;
    return s;
  }();
  return *d;
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.d_eff = 8;
  c.n_heads = 2;
  c.ff_dim = 16;
  c.n_blocks = 2;
  c.t_window = 6;
  c.dropout_prob = 0.1;
  c.y_min = small_data().norm.y_min;
  c.y_max = small_data().norm.y_max;
  return c;
}

TransformerModel tiny_model(std::uint64_t seed) {
  RngStream rng(seed);
  auto m = init_model(tiny_model_config(), rng);
  m.normalizer = small_data().norm;
  return m;
}

bool same_parameters(const TransformerModel& a, const TransformerModel& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (std::memcmp(pa[i].tensor.data().data(), pb[i].tensor.data().data(), pa[i].tensor.numel() * 8) != 0) {
      return false;
    }
  }
  return true;
}

TEST(Mse, ExamplesAndErrors) {
  EXPECT_EQ(mse_loss(Tensor::vector({1, 2, 3}), Tensor::vector({1, 2, 3})).item(), 0.0);
  EXPECT_EQ(mse_loss(Tensor::vector({1}), Tensor::vector({0})).item(), 1.0);
  EXPECT_DOUBLE_EQ(mse_loss(Tensor::vector({1, 3}), Tensor::vector({0, 0})).item(), 5.0);
  EXPECT_EQ(code_of([] { mse_loss(Tensor::vector({1, 2}), Tensor::vector({1})); }), ErrorCode::dimension);
  EXPECT_EQ(code_of([] { mse_loss(Tensor({0}), Tensor({0})); }), ErrorCode::dimension);
}

TEST(Mse, GradientIsScaledResidual) {
  RngStream rng(1);
  Tensor pred({7}), target({7});
  for (double& v : pred.data()) v = rng.uniform(10, 30);
  for (double& v : target.data()) v = rng.uniform(10, 30);
  pred.set_requires_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(mse_loss(pred, target));
  }
  const auto g = *pred.grad();
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_NEAR(g[i], 2.0 * (pred.data()[i] - target.data()[i]) / 7.0, 1e-12);
    // Central difference; the loss is quadratic so the only error is rounding.
    const double h = 1e-5, x0 = pred.data()[i];
    pred.data()[i] = x0 + h;
    const double up = mse_loss(pred.detach(), target).item();
    pred.data()[i] = x0 - h;
    const double down = mse_loss(pred.detach(), target).item();
    pred.data()[i] = x0;
    EXPECT_NEAR((up - down) / (2 * h), g[i], 1e-8);
  }
}

TEST(Schedule, EndpointsUnderDefaults) {
  const TrainConfig cfg;
  const std::size_t total = 1000;
  const auto s0 = one_cycle_at(0, cfg, total);
  EXPECT_EQ(s0.lr, 1e-6);
  EXPECT_EQ(s0.beta1, 0.1);
  const std::size_t peak = peak_step(cfg, total);
  EXPECT_EQ(peak, 300u);
  const auto sp = one_cycle_at(peak, cfg, total);
  EXPECT_DOUBLE_EQ(sp.lr, 1e-2);
  EXPECT_DOUBLE_EQ(sp.beta1, 0.01);
  EXPECT_LE(one_cycle_at(total - 1, cfg, total).lr, 1e-6 + 1e-12);
  EXPECT_NEAR(one_cycle_at(total - 1, cfg, total).beta1, 0.1, 1e-15);
}

TEST(Schedule, MonotonePhasesAndAntiPhaseMomentum) {
  TrainConfig cfg;
  for (std::size_t total : {2u, 3u, 10u, 77u, 500u}) {
    const std::size_t peak = peak_step(cfg, total);
    EXPECT_GE(peak, 1u);
    EXPECT_LE(peak, total - 1);
    for (std::size_t s = 1; s < total; ++s) {
      const auto a = one_cycle_at(s - 1, cfg, total), b = one_cycle_at(s, cfg, total);
      if (s <= peak) {
        EXPECT_GE(b.lr, a.lr);
        EXPECT_LE(b.beta1, a.beta1);
      } else {
        EXPECT_LE(b.lr, a.lr);
        EXPECT_GE(b.beta1, a.beta1);
      }
      // Normalised positions coincide: beta1 mirrors lr.
      const double rise = (b.lr - cfg.lr_min) / (cfg.lr_max - cfg.lr_min);
      EXPECT_NEAR(b.beta1, cfg.mom_peak - (cfg.mom_peak - cfg.mom_trough) * rise, 1e-12);
    }
  }
}

TEST(Schedule, CosineShapeMidway) {
  const TrainConfig cfg;
  // Halfway up the warm-up the cosine sits at half the range.
  EXPECT_NEAR(one_cycle_at(150, cfg, 1000).lr, cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min), 1e-15);
}

TEST(Schedule, MomentumCyclingOffAndErrors) {
  TrainConfig cfg;
  cfg.cycle_momentum = false;
  for (std::size_t s : {0u, 30u, 99u}) EXPECT_EQ(one_cycle_at(s, cfg, 100).beta1, 0.9);
  EXPECT_EQ(code_of([&] { one_cycle_at(100, cfg, 100); }), ErrorCode::parameter);
  cfg.lr_min = cfg.lr_max;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::config);
  cfg = TrainConfig{};
  cfg.pct_up = 1.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::config);
  cfg = TrainConfig{};
  cfg.mom_trough = 0.2;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::config);
}

TEST(Schedule, GeometricGridClosedForm) {
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_NEAR(geometric_lr(k, 50, 1e-6, 1e-2), 1e-6 * std::pow(1e4, k / 49.0), 1e-12);
  }
  EXPECT_DOUBLE_EQ(geometric_lr(49, 50, 1e-6, 1e-2), 1e-2);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Tensor w = Tensor::vector({1.5, -2.0});
  const std::vector<double> g{0.0, 0.0};
  set_grad(w, g);
  const std::vector<NamedTensor> params{{"w", w}};
  AdamState st;
  adam_step(params, st, {0.1, 0.9, 0.999, 1e-8});
  EXPECT_EQ(w.data()[0], 1.5);
  EXPECT_EQ(w.data()[1], -2.0);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w = Tensor::vector({0.0});
  const std::vector<double> g{1.0};
  set_grad(w, g);
  AdamState st;
  adam_step(std::vector<NamedTensor>{{"w", w}}, st, {0.1, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(w.data()[0], -0.1, 1e-8);
  EXPECT_NEAR(st.m[0][0], 0.1, 1e-15);
  EXPECT_NEAR(st.v[0][0], 0.001, 1e-15);
}

TEST(Adam, UpdateRuleMatchesReference) {
  RngStream rng(2);
  Tensor w({5});
  for (double& v : w.data()) v = rng.uniform(-1, 1);
  std::vector<double> theta(w.data().begin(), w.data().end()), m(5), v(5);
  AdamState st;
  const double b1s[] = {0.1, 0.05, 0.01, 0.07};
  for (int t = 1; t <= 4; ++t) {
    std::vector<double> g(5);
    for (double& x : g) x = rng.uniform(-2, 2);
    set_grad(w, g);
    const AdamHyper h{0.01, b1s[t - 1], 0.999, 1e-8};
    adam_step(std::vector<NamedTensor>{{"w", w}}, st, h);
    for (std::size_t i = 0; i < 5; ++i) {
      m[i] = h.beta1 * m[i] + (1 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1 - h.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(h.beta1, t));
      const double vh = v[i] / (1 - std::pow(h.beta2, t));
      theta[i] -= h.lr * mh / (std::sqrt(vh) + h.eps);
      EXPECT_NEAR(w.data()[i], theta[i], 1e-14);
      EXPECT_GE(st.v[0][i], 0.0);
    }
  }
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  Tensor w = Tensor::vector({0.0});
  AdamState st;
  for (int k = 0; k < 500; ++k) {
    const std::vector<double> g{2.0 * (w.data()[0] - 3.0)};
    set_grad(w, g);
    adam_step(std::vector<NamedTensor>{{"w", w}}, st, {0.1, 0.9, 0.999, 1e-8});
  }
  EXPECT_LT(std::abs(w.data()[0] - 3.0), 1e-3);
}

TEST(Adam, FirstStepInvariantToGradientScale) {
  RngStream rng(3);
  std::vector<double> g(20);
  for (double& x : g) x = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(1e-3, 1.0);
  auto first_update = [&](double scale) {
    Tensor w({20});
    std::vector<double> gs(g);
    for (double& x : gs) x *= scale;
    set_grad(w, gs);
    AdamState st;
    adam_step(std::vector<NamedTensor>{{"w", w}}, st, {0.01, 0.1, 0.999, 1e-8});
    return std::vector<double>(w.data().begin(), w.data().end());
  };
  const auto a = first_update(1.0), b = first_update(10.0);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_LT(std::abs(b[i] - a[i]), 0.01 * std::abs(a[i]));
}

TEST(Adam, NonFiniteGradientNamesParameterAndChangesNothing) {
  Tensor a = Tensor::vector({1.0}), b = Tensor::vector({2.0});
  set_grad(a, std::vector<double>{0.5});
  set_grad(b, std::vector<double>{NAN});
  AdamState st;
  try {
    adam_step(std::vector<NamedTensor>{{"alpha", a}, {"bravo", b}}, st, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numeric);
    EXPECT_NE(std::string(e.what()).find("bravo"), std::string::npos);
  }
  EXPECT_EQ(a.data()[0], 1.0);
  EXPECT_EQ(st.t, 0u);
  Tensor c = Tensor::vector({1.0});
  c.set_requires_grad();
  EXPECT_EQ(code_of([&] { adam_step(std::vector<NamedTensor>{{"c", c}}, st, {}); }), ErrorCode::absent_gradient);
}

TEST(Adam, GlobalNormClipping) {
  Tensor a = Tensor::vector({3.0}), b = Tensor::vector({0.0, 4.0});
  set_grad(a, std::vector<double>{3.0});
  set_grad(b, std::vector<double>{0.0, 4.0});
  const std::vector<NamedTensor> ps{{"a", a}, {"b", b}};
  EXPECT_DOUBLE_EQ(gradient_norm(ps), 5.0);
  EXPECT_DOUBLE_EQ(clip_gradients(ps, 1.0), 5.0);
  EXPECT_NEAR(gradient_norm(ps), 1.0, 1e-15);
  EXPECT_NEAR((*a.grad())[0], 0.6, 1e-15);
  clip_gradients(ps, 10.0);
  EXPECT_NEAR(gradient_norm(ps), 1.0, 1e-15);
}

TEST(TrainStep, OverfitsOneBatch) {
  auto& d = small_data();
  ModelConfig c = tiny_model_config();
  c.dropout_prob = 0.0;
  RngStream init(4);
  auto m = init_model(c, init);
  const std::vector<WindowRef> windows(d.train.begin() + 200, d.train.begin() + 216);
  const WindowBatch batch = d.table->make_batch(windows);
  TrainConfig cfg;
  cfg.cycle_momentum = false;
  AdamState st;
  RngStream drop(5);
  const double initial = train_step(m, batch, st, cfg, {3e-3, 0.9}, drop, 0);
  double last = initial;
  for (std::size_t k = 1; k < 500; ++k) last = train_step(m, batch, st, cfg, {3e-3, 0.9}, drop, k);
  EXPECT_LE(last, initial / 100.0) << "initial " << initial;
}

TEST(TrainStep, NonFiniteLossIsDivergence) {
  auto& d = small_data();
  auto m = tiny_model(6);
  auto before = m.clone();
  WindowBatch batch = d.table->make_batch(std::vector<WindowRef>(d.train.begin(), d.train.begin() + 4));
  batch.target.data()[1] = NAN;
  AdamState st;
  RngStream drop(7);
  try {
    train_step(m, batch, st, TrainConfig{}, {1e-3, 0.1}, drop, 17);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::divergence);
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
  EXPECT_TRUE(same_parameters(m, before));
}

TEST(LrFinder, GeometricRowsAndEarlyStop) {
  auto& d = small_data();
  const auto m = tiny_model(8);
  TrainConfig cfg;
  cfg.batch_size = 32;
  const std::size_t steps = 40;
  const auto rows = lr_range_test(m, *d.table, d.train, cfg, steps, 1e-6, 1e-2);
  ASSERT_FALSE(rows.empty());
  EXPECT_LE(rows.size(), steps);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_NEAR(rows[k].lr, 1e-6 * std::pow(1e4, static_cast<double>(k) / (steps - 1)), 1e-12);
    if (k) EXPECT_GT(rows[k].lr, rows[k - 1].lr);
    EXPECT_TRUE(std::isfinite(rows[k].loss));
  }
  // The model passed in is not modified.
  EXPECT_TRUE(same_parameters(m, tiny_model(8)));
  std::ostringstream csv;
  write_lr_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, 8), "lr,loss\n");
  EXPECT_EQ(code_of([&] { lr_range_test(m, *d.table, d.train, cfg, 1); }), ErrorCode::parameter);
}

TEST(Fit, ZeroEpochsIsNoOp) {
  auto& d = small_data();
  auto m = tiny_model(9);
  const auto before = m.clone();
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = fit(m, *d.table, d.train, d.val, cfg, d.params);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_TRUE(same_parameters(m, before));
}

TEST(Fit, DeterministicLogsAndParameters) {
  auto& d = small_data();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 64;
  cfg.seed = 11;
  auto a = tiny_model(10), b = tiny_model(10);
  const auto ra = fit(a, *d.table, d.train, d.val, cfg, d.params);
  const auto rb = fit(b, *d.table, d.train, d.val, cfg, d.params);
  ASSERT_EQ(ra.log.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(to_json_line(ra.log[i]), to_json_line(rb.log[i]));
  EXPECT_TRUE(same_parameters(a, b));
  EXPECT_GE(ra.best_epoch, 1u);
  for (const auto& m : ra.log) EXPECT_TRUE(std::isfinite(m.val_map_pct));
}

TEST(Fit, RestoresBestValidationEpoch) {
  auto& d = small_data();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.seed = 12;
  auto m = tiny_model(13);
  const auto r = fit(m, *d.table, d.train, d.val, cfg, d.params);
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < r.log.size(); ++i)
    if (r.log[i].val_map_pct < r.log[argmin].val_map_pct) argmin = i;
  EXPECT_EQ(r.best_epoch, argmin + 1);
  // Restored weights reproduce the logged validation error of that epoch.
  const auto pred = predict_windows(m, *d.table, d.val);
  std::vector<double> truth;
  for (const auto& w : d.val) truth.push_back(d.data[w.location].records[w.end].vmp);
  EXPECT_NEAR(map_error_nonzero(pred, truth), r.log[argmin].val_map_pct, 1e-12);
}

TEST(Fit, EmptyTrainingSetIsError) {
  auto& d = small_data();
  auto m = tiny_model(14);
  EXPECT_EQ(code_of([&] { fit(m, *d.table, {}, d.val, TrainConfig{}, d.params); }), ErrorCode::empty_dataset);
}

TEST(Metrics, JsonLineShape) {
  EpochMetrics m{3, 1.25, NAN, 99.5, 1e-4};
  const std::string line = to_json_line(m);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["epoch"], 3);
  EXPECT_EQ(j["train_loss"], 1.25);
  EXPECT_TRUE(j["val_map_pct"].is_null());
  EXPECT_EQ(j["val_eff_pct"], 99.5);
  EXPECT_EQ(j["lr_last"], 1e-4);
  EXPECT_EQ(line.rfind("{\"epoch\":", 0), 0u);
}

TEST(Config, TrainConfigKvRoundTrip) {
  TrainConfig c;
  c.epochs = 7;
  c.lr_max = 3e-2;
  c.cycle_momentum = false;
  c.seed = 99;
  KvConfig kv;
  c.write(kv);
  std::istringstream in(kv.to_string());
  const KvConfig back = KvConfig::parse(in);
  TrainConfig d;
  d.read(back);
  back.require_all_consumed();
  EXPECT_EQ(d.epochs, 7u);
  EXPECT_EQ(d.lr_max, 3e-2);
  EXPECT_FALSE(d.cycle_momentum);
  EXPECT_EQ(d.seed, 99u);
}

}  // namespace
}  // namespace helios
