#pragma once

#include <utility>

#include "srnet/rng.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Draws aligned square crops fully inside the source image. Crop origins
/// are snapped to multiples of `align` (the model's 2^T divisibility rule).
struct PatchSampler {
    int64_t patch = 100;
    int64_t align = 4;
};

/// Identical crop window applied to both images.
std::pair<TensorF, TensorF> sample_patch_pair(const TensorF& rainy, const TensorF& clean,
                                              const PatchSampler& sampler, RngState& rng);

template <typename T>
struct Padded {
    Tensor<T> img;
    int64_t orig_h = 0, orig_w = 0;
};

/// Reflect-pads on the right/bottom so both extents divide m.
template <typename T>
Padded<T> pad_to_multiple(const Tensor<T>& img, int64_t m);

/// Restores the exact pre-padding extents.
template <typename T>
Tensor<T> crop_back(const Tensor<T>& img, int64_t orig_h, int64_t orig_w);

}  // namespace srnet
