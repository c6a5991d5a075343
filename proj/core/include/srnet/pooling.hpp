#pragma once

#include <cstdint>
#include <vector>

#include "srnet/parallel.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Argmax switches of a 2x2/stride-2 max pool. For each pooled element the
/// flat (y*W + x) position of the window max inside its own (batch, channel)
/// input plane; windows are disjoint so indices within a plane are distinct.
struct PoolIndices {
    TensorShape in_shape;
    TensorShape out_shape;
    std::vector<int32_t> idx;  // one per pooled element, NCHW order

    bool consumed = false;  // set once the matching backward ran
};

template <typename T>
struct MaxPoolResult {
    Tensor<T> output;
    PoolIndices indices;
};

/// 2x2 max pool, stride 2. Requires even spatial extents. Ties break toward
/// the smallest flat index so replays are bit-exact.
template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& input, const ExecOpts& opts = {});

/// Routes each pooled gradient back to its argmax source; zero elsewhere.
template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, PoolIndices& indices,
                            const ExecOpts& opts = {});

/// Scatters each value to the recorded switch position of a pool taken on a
/// tensor shaped `out_shape`; every other cell is exactly zero. At most one
/// nonzero lands per 2x2 block per plane, which is what makes the decoder
/// feature maps sparse.
template <typename T>
Tensor<T> maxunpool2_forward(const Tensor<T>& input, const PoolIndices& indices,
                             const TensorShape& out_shape, const ExecOpts& opts = {});

/// Gathers gradients from the scattered positions.
template <typename T>
Tensor<T> maxunpool2_backward(const Tensor<T>& grad_out, const PoolIndices& indices,
                              const ExecOpts& opts = {});

}  // namespace srnet
