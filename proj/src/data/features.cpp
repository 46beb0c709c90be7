#include "helios/data/features.hpp"

#include <algorithm>

#include "helios/core/error.hpp"

namespace helios {

ContinuousFeatures continuous_features(const WeatherRecord& r) {
  return {r.temp_air, r.dni, r.dhi, r.sun_alt, r.sun_azi, r.wind, r.rel_hum, r.pm10};
}

double Normalizer::normalize(std::size_t feature, double value) const {
  if (is_constant(feature)) return 0.0;
  return (value - min[feature]) / (max[feature] - min[feature]);
}

double Normalizer::denormalize(std::size_t feature, double scaled) const {
  if (is_constant(feature)) return min[feature];
  return min[feature] + scaled * (max[feature] - min[feature]);
}

Normalizer fit_normalizer(std::span<const WeatherRecord> train) {
  if (train.empty()) fail(ErrorCode::empty_dataset, "cannot fit a normalizer on zero records");
  Normalizer n;
  n.min = continuous_features(train.front());
  n.max = n.min;
  n.y_min = n.y_max = train.front().vmp;
  for (const auto& r : train) {
    const auto f = continuous_features(r);
    for (std::size_t i = 0; i < f.size(); ++i) {
      n.min[i] = std::min(n.min[i], f[i]);
      n.max[i] = std::max(n.max[i], f[i]);
    }
    n.y_min = std::min(n.y_min, r.vmp);
    n.y_max = std::max(n.y_max, r.vmp);
  }
  return n;
}

ContinuousFeatures apply_normalizer(const Normalizer& norm, const WeatherRecord& rec) {
  auto f = continuous_features(rec);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = norm.normalize(i, f[i]);
  return f;
}

std::array<std::size_t, 2> categorical_indices(int month, int hour) {
  if (month < 1 || month > 12) fail(ErrorCode::encoding, "month category out of range: " + std::to_string(month));
  if (hour < 0 || hour > 23) fail(ErrorCode::encoding, "hour category out of range: " + std::to_string(hour));
  return {static_cast<std::size_t>(month - 1), FeatureSchema::kCardinalities[0] + static_cast<std::size_t>(hour)};
}

std::array<double, FeatureSchema::one_hot_width()> encode_categorical(int month, int hour) {
  std::array<double, FeatureSchema::one_hot_width()> v{};
  for (auto i : categorical_indices(month, hour)) v[i] = 1.0;
  return v;
}

}  // namespace helios
