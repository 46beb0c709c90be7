#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "helios/core/rng.hpp"
#include "helios/core/tensor.hpp"
#include "helios/data/features.hpp"
#include "helios/data/record.hpp"

namespace helios {

/// T consecutive records of one location ending at record `end`.
struct WindowRef {
  std::size_t location = 0;
  std::size_t end = 0;

  friend auto operator<=>(const WindowRef&, const WindowRef&) = default;
};

/// Throws ErrorCode::integrity naming the location and index of the first
/// pair of records that are not exactly one hour apart.
void check_contiguous(const Dataset& data);

/// Every full window of length T; locations shorter than T contribute none.
std::vector<WindowRef> build_windows(const Dataset& data, std::size_t t_window);

struct SplitOptions {
  std::uint64_t seed = 0;
  std::size_t t_window = 50;
  std::size_t holdout_hours = 200;
  /// Length of the monitoring tail taken from a second location (0 disables).
  std::size_t val_hours = 200;
};

struct DataSplit {
  std::size_t test_location = 0;
  std::optional<std::size_t> val_location;
  /// Per location, records [0, train_end[l]) may be used for training.
  std::vector<std::size_t> train_end;
  std::vector<WindowRef> train;
  std::vector<WindowRef> val;
  std::vector<WindowRef> test;
};

/// Chooses the test location by a seeded uniform draw among locations with at
/// least holdout + T records and holds out its final `holdout_hours` records
/// as test targets; a second seeded location supplies the validation tail.
DataSplit split_train_test(const Dataset& data, const SplitOptions& options);

/// Records usable for fitting the normalizer (never any held-out tail).
std::vector<WeatherRecord> training_records(const Dataset& data, const DataSplit& split);

/// Shuffles a copy of the windows and cuts it into batches of size B; the
/// last batch may be short.
std::vector<std::vector<WindowRef>> batches(std::span<const WindowRef> windows, std::size_t batch_size,
                                            RngStream& rng);

/// Ground-truth state at a window's final timestep.
struct EnvPoint {
  double g_eff = 0.0;
  double t_cell = 0.0;
  double pmp = 0.0;
  double imp = 0.0;
  double vmp = 0.0;
};

struct WindowBatch {
  Tensor x_cont;  // [B x T x n_cont], normalised
  Tensor x_cat;   // [B x T x N], one-hot
  Tensor mask;    // [B x T], 1 = valid
  Tensor target;  // [B], vmp at the final timestep (V)
  std::vector<EnvPoint> env;

  std::size_t size() const { return env.size(); }
};

/// Normalised features of every record, prepared once so that batches are
/// assembled by copying.
class FeatureTable {
 public:
  FeatureTable(const Dataset& data, const Normalizer& norm, std::size_t t_window);

  std::size_t t_window() const { return t_window_; }
  const Dataset& data() const { return *data_; }

  WindowBatch make_batch(std::span<const WindowRef> windows) const;

 private:
  const Dataset* data_;
  std::size_t t_window_;
  std::vector<std::size_t> offset_;  // first flat record index of each location
  std::vector<double> cont_;         // [records x n_cont]
  std::vector<std::array<std::size_t, 2>> cat_;
};

}  // namespace helios
