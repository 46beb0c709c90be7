#include "helios/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "helios/core/error.hpp"
#include "helios/model/checkpoint.hpp"
#include "helios/pv/generate.hpp"
#include "helios/train/trainer.hpp"

namespace helios {

namespace {

constexpr std::uint64_t kInitStream = 0x494E'4954ULL;   // "INIT"
constexpr std::uint64_t kSweepStream = 0x5357'5045ULL;  // "SWPE"

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  return out;
}

Dataset load_dataset(const RunConfig& cfg) {
  Dataset data = read_dataset_csv(cfg.data());
  check_contiguous(data);
  return data;
}

SplitOptions split_options(const RunConfig& cfg, std::size_t t_window) {
  SplitOptions o;
  o.seed = cfg.seed;
  o.t_window = t_window;
  o.holdout_hours = cfg.holdout_hours;
  o.val_hours = cfg.val_hours;
  return o;
}

std::unique_ptr<PreparedData> prepare_impl(Dataset data, const RunConfig& cfg, const Normalizer* norm,
                                           std::size_t t_window) {
  auto p = std::make_unique<PreparedData>();
  p->data = std::move(data);
  p->split = split_train_test(p->data, split_options(cfg, t_window));
  p->normalizer = norm ? *norm : fit_normalizer(training_records(p->data, p->split));
  p->table = std::make_unique<FeatureTable>(p->data, p->normalizer, t_window);
  return p;
}

TransformerModel fresh_model(ModelConfig mc, const Normalizer& norm, std::uint64_t seed) {
  mc.y_min = norm.y_min;
  mc.y_max = norm.y_max;
  RngStream rng(seed, kInitStream);
  TransformerModel model = init_model(mc, rng);
  model.normalizer = norm;
  return model;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::unique_ptr<PreparedData> prepare_data(Dataset data, const RunConfig& cfg) {
  return prepare_impl(std::move(data), cfg, nullptr, cfg.model.t_window);
}

std::unique_ptr<PreparedData> prepare_data(Dataset data, const RunConfig& cfg, const Normalizer& norm) {
  return prepare_impl(std::move(data), cfg, &norm, cfg.model.t_window);
}

int run_gen_data(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const PvModuleParams module = resolve_module(cfg);
  const auto m = measure_module(module);
  log << "module: pmp " << fixed(m.pmp_stc, 2) << " W, fill factor " << fixed(m.fill_factor, 4) << ", gamma "
      << fixed(100.0 * m.gamma_p, 3) << " %/C\n";
  const Dataset data = generate_dataset(cfg.sites, cfg.years, module);
  const auto path = cfg.data();
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  write_dataset_csv(path, data);
  std::size_t rows = 0;
  for (const auto& s : data) rows += s.records.size();
  out << "wrote " << rows << " records for " << data.size() << " locations to " << path.string() << "\n";
  return 0;
}

int run_train(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const PvModuleParams module = resolve_module(cfg);
  auto prep = prepare_data(load_dataset(cfg), cfg);
  TransformerModel model = fresh_model(cfg.model, prep->normalizer, cfg.seed);
  log << "training " << model.parameter_count() << " parameters on " << prep->split.train.size()
      << " windows, validating on " << prep->split.val.size() << "\n";

  ensure_dir(cfg.out_dir);
  cfg.to_kv().save(cfg.out_dir / "train.cfg");
  auto metrics = open_out(cfg.out_dir / "metrics.jsonl");
  const auto start = std::chrono::steady_clock::now();
  const FitResult result =
      fit(model, *prep->table, prep->split.train, prep->split.val, cfg.train, module, [&](const EpochMetrics& m) {
        metrics << to_json_line(m) << '\n' << std::flush;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log << "epoch " << m.epoch << "/" << cfg.train.epochs << " loss " << fixed(m.train_loss, 4) << " val map "
            << fixed(m.val_map_pct, 3) << "% eff " << fixed(m.val_eff_pct, 3) << "% (" << fixed(secs, 0)
            << " s)\n";
      });
  save_checkpoint(model, cfg.checkpoint());
  out << "best epoch " << result.best_epoch << "; checkpoint " << cfg.checkpoint().string() << "\n";
  return 0;
}

int run_eval(const RunConfig& cfg, std::ostream& out, std::ostream& /*log*/) {
  const PvModuleParams module = resolve_module(cfg);
  TransformerModel model = load_checkpoint(cfg.checkpoint());
  RunConfig run = cfg;
  run.model = model.config;
  auto prep = prepare_data(load_dataset(cfg), run, model.normalizer);
  const EvalReport report = evaluate(model, *prep->table, prep->split.test, module);
  ensure_dir(cfg.out_dir);
  open_out(cfg.out_dir / "report.json") << report_json(report);
  write_trace_csv(cfg.out_dir / "trace.csv", report.trace);
  out << report_json(report);
  return 0;
}

int run_lr_find(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  auto prep = prepare_data(load_dataset(cfg), cfg);
  const TransformerModel model = fresh_model(cfg.model, prep->normalizer, cfg.seed);
  const auto rows =
      lr_range_test(model, *prep->table, prep->split.train, cfg.train, cfg.lr_find_steps, cfg.lr_find_lo,
                    cfg.lr_find_hi);
  auto file = open_out(cfg.out_dir / "lr_find.csv");
  write_lr_csv(file, rows);
  log << "lr range test: " << rows.size() << " of " << cfg.lr_find_steps << " steps\n";
  out << "wrote " << (cfg.out_dir / "lr_find.csv").string() << "\n";
  return 0;
}

std::vector<double> sweep_values(const std::string& axis) {
  if (axis == "d_eff") return {32, 64, 128, 256, 512};
  if (axis == "ff_dim") return {128, 256, 512};
  if (axis == "dropout") return {0.1, 0.2, 0.3, 0.4, 0.5};
  if (axis == "heads") return {4, 8, 16, 32};
  fail(ErrorCode::usage, "unknown sweep axis '" + axis + "' (expected d_eff, ff_dim, dropout or heads)");
}

void write_sweep_csv(std::ostream& out, const std::string& axis, const std::vector<SweepRow>& rows) {
  out << axis << ",d_adj,map_pct,avg_eff_pct\n";
  for (const auto& r : rows) {
    out << format_double(r.value) << ',';
    if (r.d_adj) out << r.d_adj;
    out << ',' << format_double(r.map_pct) << ',' << format_double(r.avg_eff_pct) << '\n';
  }
}

int run_sweep(const RunConfig& cfg, const std::string& axis, bool small, std::ostream& out, std::ostream& log) {
  const auto values = sweep_values(axis);
  const PvModuleParams module = resolve_module(cfg);

  // One axis at a time around the best configuration of the original study.
  ModelConfig base = cfg.model;
  base.d_eff = 256;
  base.ff_dim = 256;
  base.dropout_prob = 0.2;
  base.n_heads = 16;
  TrainConfig train = cfg.train;

  Dataset data;
  if (std::filesystem::exists(cfg.data())) {
    data = load_dataset(cfg);
  } else {
    auto sites = cfg.sites;
    if (small) sites.resize(std::min<std::size_t>(sites.size(), 2));
    data = generate_dataset(sites, cfg.years, module);
  }
  auto prep = prepare_data(std::move(data), cfg);
  std::vector<WindowRef> train_windows = prep->split.train;
  if (small) {
    // Desk-scale: one short epoch on a seeded subsample.
    RngStream rng(cfg.seed, kSweepStream);
    shuffle(std::span<WindowRef>(train_windows), rng);
    train_windows.resize(std::min<std::size_t>(train_windows.size(), 256));
    std::sort(train_windows.begin(), train_windows.end());
    train.epochs = 1;
    train.batch_size = 64;
  }

  std::vector<SweepRow> rows;
  for (double v : values) {
    ModelConfig mc = base;
    if (axis == "d_eff") mc.d_eff = static_cast<std::size_t>(v);
    if (axis == "ff_dim") mc.ff_dim = static_cast<std::size_t>(v);
    if (axis == "dropout") mc.dropout_prob = v;
    if (axis == "heads") mc.n_heads = static_cast<std::size_t>(v);
    TransformerModel model = fresh_model(mc, prep->normalizer, cfg.seed);
    fit(model, *prep->table, train_windows, {}, train, module);
    const EvalReport r = evaluate(model, *prep->table, prep->split.test, module);
    rows.push_back({v, axis == "d_eff" ? mc.d_adj() : 0, r.map_error_pct, r.avg_efficiency_pct});
    log << axis << " = " << format_double(v) << ": map " << fixed(r.map_error_pct, 3) << "% eff "
        << fixed(r.avg_efficiency_pct, 3) << "%\n";
  }
  auto file = open_out(cfg.out_dir / ("sweep_" + axis + ".csv"));
  write_sweep_csv(file, axis, rows);
  write_sweep_csv(out, axis, rows);
  return 0;
}

int run_predict(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const PvModuleParams module = resolve_module(cfg);
  TransformerModel model = load_checkpoint(cfg.checkpoint());
  const Dataset data = load_dataset(cfg);
  const auto windows = build_windows(data, model.config.t_window);
  if (windows.empty()) fail(ErrorCode::empty_dataset, "no location has a full window of records");
  const FeatureTable table(data, model.normalizer, model.config.t_window);
  const auto v = predict_windows(model, table, windows);
  std::vector<double> p(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& rec = data[windows[i].location].records[windows[i].end];
    if (rec.g_eff > 0.0 && v[i] > 0.0) p[i] = v[i] * iv_current(v[i], rec.g_eff, rec.t_cell, module);
  }
  const auto filtered = high_pass_filter(v, p);
  const auto path = cfg.out_dir / "predictions.csv";
  auto file = open_out(path);
  file << "location_id,t,v_pred_v,p_pred_w\n";
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& rec = data[windows[i].location].records[windows[i].end];
    file << rec.location_id << ',' << hour_stamp(rec) << ',' << format_double(filtered.v[i]) << ','
         << format_double(filtered.p[i]) << '\n';
  }
  log << "predicted " << v.size() << " windows\n";
  out << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace helios
