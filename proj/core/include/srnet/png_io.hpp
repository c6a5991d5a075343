#pragma once

#include <filesystem>

#include "srnet/tensor.hpp"

namespace srnet {

/// Decodes an 8-bit RGB PNG (color type 2, no interlace) into a (1,3,H,W)
/// tensor scaled to [0,1] via v/255. Anything else is a hard error.
TensorF load_image(const std::filesystem::path& path);

/// Encodes a (1,3,H,W) tensor as an 8-bit RGB PNG. Values are clamped to
/// [0,1] and quantized with round-half-away-from-zero, so loading one of our
/// own files and saving it again is byte-identical.
void save_image(const TensorF& img, const std::filesystem::path& path);

/// Writes a single-channel tensor as gray RGB, min-max normalized per plane
/// (flat planes map to black). Used for feature-map dumps.
void save_image_gray_normalized(const TensorF& plane, const std::filesystem::path& path);

}  // namespace srnet
