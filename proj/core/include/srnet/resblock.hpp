#pragma once

#include <type_traits>

#include "srnet/conv2d.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Residual block: out = x + conv2(relu(conv1(x))). Both convs are square
/// kernels with the block's dilation; channel count is preserved.
template <typename T>
struct ResblockTape {
    ConvTape<T> conv1;      // caches x
    Tensor<T> relu_out;     // conv2 input; doubles as the ReLU mask
    ConvTape<T> conv2;
    bool consumed = false;
};

template <typename T>
struct ResblockGrads {
    Tensor<T> input;
    Tensor<T> w1, b1, w2, b2;
};

template <typename T>
Tensor<T> resblock_forward(const Tensor<T>& input, const Tensor<T>& w1, const Tensor<T>& b1,
                           const Tensor<T>& w2, const Tensor<T>& b2, const ConvSpec& spec,
                           std::type_identity_t<ResblockTape<T>*> tape = nullptr,
                           const ExecOpts& opts = {});

template <typename T>
ResblockGrads<T> resblock_backward(const Tensor<T>& grad_out, const Tensor<T>& w1,
                                   const Tensor<T>& w2, ResblockTape<T>& tape,
                                   const ConvSpec& spec, const ExecOpts& opts = {});

}  // namespace srnet
