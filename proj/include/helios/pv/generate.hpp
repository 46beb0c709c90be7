#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "helios/data/record.hpp"
#include "helios/pv/diode.hpp"
#include "helios/pv/weather.hpp"

namespace helios {

/// `count` climates spread over 8-32 degrees north, drawn from `seed`.
std::vector<SynthConfig> default_locations(std::size_t count, std::uint64_t seed);

/// 8760 * years labelled hourly records of one location.
LocationSeries generate_location(const SynthConfig& cfg, int years, const PvModuleParams& params);

/// Locations are generated independently (in parallel when workers allow)
/// and returned in input order.
Dataset generate_dataset(std::span<const SynthConfig> locations, int years, const PvModuleParams& params);

}  // namespace helios
