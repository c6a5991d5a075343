#pragma once

#include "srnet/parallel.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Doubles both spatial extents with align-corners-false bilinear weights
/// (output pixel o samples the input at (o + 0.5)/2 - 0.5, edges clamped).
template <typename T>
Tensor<T> bilinear_upsample2(const Tensor<T>& input, const ExecOpts& opts = {});

/// Transpose of the interpolation: scatters each output gradient onto the up
/// to four source cells with the forward weights.
template <typename T>
Tensor<T> bilinear_upsample2_backward(const Tensor<T>& grad_out, const TensorShape& in_shape,
                                      const ExecOpts& opts = {});

}  // namespace srnet
