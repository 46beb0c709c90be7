#include "helios/data/windows.hpp"

#include <algorithm>

#include "helios/core/error.hpp"

namespace helios {

namespace {
constexpr std::uint64_t kSplitStream = 0x5350'4C49'54ULL;  // "SPLIT"
}

void check_contiguous(const Dataset& data) {
  for (const auto& loc : data) {
    for (std::size_t i = 1; i < loc.records.size(); ++i) {
      const long long step = hour_stamp(loc.records[i]) - hour_stamp(loc.records[i - 1]);
      if (step != 1) {
        fail(ErrorCode::integrity, "location '" + loc.location_id + "' index " + std::to_string(i) +
                                       ": records are " + std::to_string(step) + " h apart, expected 1 h");
      }
    }
  }
}

std::vector<WindowRef> build_windows(const Dataset& data, std::size_t t_window) {
  if (t_window < 1) fail(ErrorCode::parameter, "window length must be at least 1");
  check_contiguous(data);
  std::vector<WindowRef> out;
  for (std::size_t l = 0; l < data.size(); ++l) {
    const std::size_t n = data[l].records.size();
    for (std::size_t end = t_window - 1; end < n; ++end) out.push_back({l, end});
  }
  return out;
}

DataSplit split_train_test(const Dataset& data, const SplitOptions& opt) {
  if (opt.t_window < 1) fail(ErrorCode::parameter, "window length must be at least 1");
  check_contiguous(data);

  std::vector<std::size_t> eligible;
  for (std::size_t l = 0; l < data.size(); ++l) {
    if (data[l].records.size() >= opt.holdout_hours + opt.t_window) eligible.push_back(l);
  }
  if (eligible.empty()) {
    fail(ErrorCode::split, "no location has " + std::to_string(opt.holdout_hours + opt.t_window) +
                               " records for a " + std::to_string(opt.holdout_hours) + " h holdout");
  }
  RngStream rng(opt.seed, kSplitStream);
  DataSplit split;
  split.test_location = eligible[rng.below(eligible.size())];

  if (opt.val_hours > 0) {
    std::vector<std::size_t> candidates;
    for (std::size_t l = 0; l < data.size(); ++l) {
      if (l != split.test_location && data[l].records.size() >= opt.val_hours + opt.t_window) {
        candidates.push_back(l);
      }
    }
    if (!candidates.empty()) split.val_location = candidates[rng.below(candidates.size())];
  }

  split.train_end.resize(data.size());
  for (std::size_t l = 0; l < data.size(); ++l) {
    const std::size_t n = data[l].records.size();
    std::size_t cut = n;
    if (l == split.test_location) {
      cut = n - opt.holdout_hours;
      for (std::size_t end = cut; end < n; ++end) split.test.push_back({l, end});
    } else if (split.val_location && l == *split.val_location) {
      cut = n - opt.val_hours;
      for (std::size_t end = cut; end < n; ++end) split.val.push_back({l, end});
    }
    split.train_end[l] = cut;
    for (std::size_t end = opt.t_window - 1; end < cut; ++end) split.train.push_back({l, end});
  }
  return split;
}

std::vector<WeatherRecord> training_records(const Dataset& data, const DataSplit& split) {
  std::vector<WeatherRecord> out;
  for (std::size_t l = 0; l < data.size(); ++l) {
    const auto& recs = data[l].records;
    out.insert(out.end(), recs.begin(), recs.begin() + static_cast<std::ptrdiff_t>(split.train_end.at(l)));
  }
  return out;
}

std::vector<std::vector<WindowRef>> batches(std::span<const WindowRef> windows, std::size_t batch_size,
                                            RngStream& rng) {
  if (batch_size < 1) fail(ErrorCode::parameter, "batch size must be at least 1");
  std::vector<WindowRef> order(windows.begin(), windows.end());
  shuffle(std::span<WindowRef>(order), rng);
  std::vector<std::vector<WindowRef>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const auto last = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(last));
  }
  return out;
}

FeatureTable::FeatureTable(const Dataset& data, const Normalizer& norm, std::size_t t_window)
    : data_(&data), t_window_(t_window) {
  std::size_t total = 0;
  for (const auto& loc : data) {
    offset_.push_back(total);
    total += loc.records.size();
  }
  cont_.reserve(total * FeatureSchema::kContinuous);
  cat_.reserve(total);
  for (const auto& loc : data) {
    for (const auto& r : loc.records) {
      const auto f = apply_normalizer(norm, r);
      cont_.insert(cont_.end(), f.begin(), f.end());
      cat_.push_back(categorical_indices(r.month, r.hour));
    }
  }
}

WindowBatch FeatureTable::make_batch(std::span<const WindowRef> windows) const {
  constexpr std::size_t nc = FeatureSchema::kContinuous;
  constexpr std::size_t nk = FeatureSchema::one_hot_width();
  const std::size_t b = windows.size();
  const std::size_t t = t_window_;
  WindowBatch batch;
  batch.x_cont = Tensor({b, t, nc});
  batch.x_cat = Tensor({b, t, nk});
  batch.mask = Tensor({b, t}, 1.0);
  batch.target = Tensor({b});
  batch.env.reserve(b);
  auto xc = batch.x_cont.data();
  auto xk = batch.x_cat.data();
  for (std::size_t i = 0; i < b; ++i) {
    const auto& w = windows[i];
    const auto& recs = data_->at(w.location).records;
    if (w.end >= recs.size() || w.end + 1 < t) {
      fail(ErrorCode::dimension, "window ending at " + std::to_string(w.end) + " does not fit location " +
                                     std::to_string(w.location));
    }
    const std::size_t first = offset_[w.location] + w.end + 1 - t;
    std::copy_n(cont_.data() + first * nc, t * nc, xc.data() + i * t * nc);
    for (std::size_t s = 0; s < t; ++s) {
      for (auto k : cat_[first + s]) xk[(i * t + s) * nk + k] = 1.0;
    }
    const auto& last = recs[w.end];
    batch.target.data()[i] = last.vmp;
    batch.env.push_back({last.g_eff, last.t_cell, last.pmp, last.imp, last.vmp});
  }
  return batch;
}

}  // namespace helios
