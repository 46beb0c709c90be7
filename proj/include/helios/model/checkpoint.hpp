#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "helios/model/transformer.hpp"

namespace helios {

inline constexpr char kCheckpointMagic[] = "MPTF1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers unsigned little-endian and all reals IEEE-754
/// binary64 little-endian:
///
///     magic "MPTF1" | u32 version | u64 n + n bytes of model config text
///     | u64 k + k feature minima + k feature maxima | y_min | y_max
///     | u64 tensor count | per tensor: u64 n + name, u64 rank, rank x u64
///       extents, row-major data
///
/// Tensors are the trainable parameters followed by the batch-norm running
/// statistics.
std::string serialize_checkpoint(TransformerModel& model);
TransformerModel deserialize_checkpoint(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(TransformerModel& model, const std::filesystem::path& path);
TransformerModel load_checkpoint(const std::filesystem::path& path);

}  // namespace helios
