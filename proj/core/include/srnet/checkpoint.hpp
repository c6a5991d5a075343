#pragma once

#include <filesystem>

#include "srnet/model.hpp"

namespace srnet {

/// Checkpoint container, little-endian throughout:
///   magic "SRNW" | version u32 | config block | tensor count u64
///   per tensor: name length u32, UTF-8 name, rank u64, extents u64 each,
///               payload f32
///   trailing CRC-32 (u32) over all preceding bytes.
/// Tensors are written in store order; payloads are down-converted to f32
/// regardless of the in-memory precision. Writes go through a temp file and
/// an atomic rename.
inline constexpr char kCheckpointMagic[4] = {'S', 'R', 'N', 'W'};
inline constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ParameterStore<T>& params);

struct CheckpointData {
    ModelConfig config;
    ParameterStore<float> params;
};

/// Throws on bad magic, unknown version, CRC mismatch, or truncation.
CheckpointData load_checkpoint(const std::filesystem::path& path);

/// Convenience: load and bind to a model (throws if the tensor-name set does
/// not match the stored config).
template <typename T>
SrnetModel<T> load_model(const std::filesystem::path& path);

}  // namespace srnet
