#pragma once

#include <type_traits>

#include "srnet/parallel.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Square-kernel, stride-1 dilated convolution. With the `same` padding rule
/// padding = dilation * (kernel - 1) / 2 the spatial extent is preserved;
/// out-of-bounds taps read zero.
struct ConvSpec {
    int64_t in_channels = 0;
    int64_t out_channels = 0;
    int64_t kernel = 3;
    int64_t dilation = 1;
    int64_t padding = 1;

    static ConvSpec same(int64_t in_c, int64_t out_c, int64_t kernel, int64_t dilation) {
        return ConvSpec{in_c, out_c, kernel, dilation, dilation * (kernel - 1) / 2};
    }
    /// Learnable-scalar count: weights + per-output-channel bias.
    int64_t param_count() const {
        return out_channels * in_channels * kernel * kernel + out_channels;
    }
    void validate() const;
};

/// Forward cache for the matching backward pass. Consumed exactly once.
template <typename T>
struct ConvTape {
    Tensor<T> input;
    bool consumed = false;
};

/// weights: (out_channels, in_channels, k, k); bias: (1, out_channels, 1, 1).
/// Uses the blocked im2col path; `tape`, when given, records the input.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         const ConvSpec& spec,
                         std::type_identity_t<ConvTape<T>*> tape = nullptr,
                         const ExecOpts& opts = {});

/// Plain six-nested-loop path. Same contract, same result bit-for-bit
/// (per-element reduction order matches the fast path); kept as the in-tree
/// reference the fast path is checked against.
template <typename T>
Tensor<T> conv2d_forward_direct(const Tensor<T>& input, const Tensor<T>& weights,
                                const Tensor<T>& bias, const ConvSpec& spec,
                                std::type_identity_t<ConvTape<T>*> tape = nullptr,
                                const ExecOpts& opts = {});

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

/// Consumes the tape (throws on reuse or shape mismatch with the forward).
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& weights,
                             ConvTape<T>& tape, const ConvSpec& spec, const ExecOpts& opts = {});

}  // namespace srnet
