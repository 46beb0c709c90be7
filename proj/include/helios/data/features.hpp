#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "helios/data/record.hpp"

namespace helios {

/// Canonical feature layout: eight continuous inputs, then the month and hour
/// categories one-hot encoded back to back.
struct FeatureSchema {
  static constexpr std::size_t kContinuous = 8;
  static constexpr std::array<std::string_view, kContinuous> kContinuousNames = {
      "temp_air", "dni", "dhi", "sun_alt", "sun_azi", "wind", "rel_hum", "pm10"};
  static constexpr std::array<std::size_t, 2> kCardinalities = {12, 24};

  /// Total one-hot width: the sum of the categorical cardinalities.
  static constexpr std::size_t one_hot_width() {
    std::size_t n = 0;
    for (auto c : kCardinalities) n += c;
    return n;
  }
};

using ContinuousFeatures = std::array<double, FeatureSchema::kContinuous>;

ContinuousFeatures continuous_features(const WeatherRecord& rec);

/// Min-max scaling fitted on training records; (y_min, y_max) bound the
/// training operating voltage.
struct Normalizer {
  ContinuousFeatures min{};
  ContinuousFeatures max{};
  double y_min = 0.0;
  double y_max = 0.0;

  bool is_constant(std::size_t feature) const { return max[feature] == min[feature]; }

  /// (x - min) / (max - min); constant features map to 0. Not clamped.
  double normalize(std::size_t feature, double value) const;
  /// Inverse of normalize (constant features return min).
  double denormalize(std::size_t feature, double scaled) const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

Normalizer fit_normalizer(std::span<const WeatherRecord> train);
ContinuousFeatures apply_normalizer(const Normalizer& norm, const WeatherRecord& rec);

/// Flat one-hot positions of (month, hour): month - 1 and 12 + hour.
std::array<std::size_t, 2> categorical_indices(int month, int hour);
std::array<double, FeatureSchema::one_hot_width()> encode_categorical(int month, int hour);

}  // namespace helios
