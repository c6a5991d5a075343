#include "srnet/resblock.hpp"

#include <stdexcept>

namespace srnet {

template <typename T>
Tensor<T> resblock_forward(const Tensor<T>& input, const Tensor<T>& w1, const Tensor<T>& b1,
                           const Tensor<T>& w2, const Tensor<T>& b2, const ConvSpec& spec,
                           std::type_identity_t<ResblockTape<T>*> tape, const ExecOpts& opts) {
    if (spec.in_channels != spec.out_channels) {
        throw std::invalid_argument("resblock: channel count must be preserved");
    }
    ConvTape<T> t1, t2;
    Tensor<T> a1 = conv2d_forward(input, w1, b1, spec, tape ? &t1 : nullptr, opts);
    Tensor<T> r1 = relu(a1);
    Tensor<T> a2 = conv2d_forward(r1, w2, b2, spec, tape ? &t2 : nullptr, opts);
    Tensor<T> out = add(input, a2);
    if (tape) {
        tape->conv1 = std::move(t1);
        tape->relu_out = std::move(r1);
        tape->conv2 = std::move(t2);
        tape->consumed = false;
    }
    return out;
}

template <typename T>
ResblockGrads<T> resblock_backward(const Tensor<T>& grad_out, const Tensor<T>& w1,
                                   const Tensor<T>& w2, ResblockTape<T>& tape, const ConvSpec& spec,
                                   const ExecOpts& opts) {
    if (tape.consumed) throw std::runtime_error("resblock backward: tape already consumed");
    tape.consumed = true;

    ConvGrads<T> g2 = conv2d_backward(grad_out, w2, tape.conv2, spec, opts);
    // ReLU mask: gradient flows where the activation survived.
    Tensor<T>& g_r1 = g2.input;
    for (size_t i = 0; i < g_r1.data.size(); ++i) {
        if (!(tape.relu_out.data[i] > T(0))) g_r1.data[i] = T(0);
    }
    ConvGrads<T> g1 = conv2d_backward(g_r1, w1, tape.conv1, spec, opts);

    ResblockGrads<T> g;
    g.input = add(grad_out, g1.input);  // skip path + conv path
    g.w1 = std::move(g1.weights);
    g.b1 = std::move(g1.bias);
    g.w2 = std::move(g2.weights);
    g.b2 = std::move(g2.bias);
    return g;
}

#define SRNET_INSTANTIATE(T)                                                                     \
    template struct ResblockTape<T>;                                                             \
    template struct ResblockGrads<T>;                                                            \
    template Tensor<T> resblock_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                        const Tensor<T>&, const Tensor<T>&, const ConvSpec&,     \
                                        std::type_identity_t<ResblockTape<T>*>, const ExecOpts&);                      \
    template ResblockGrads<T> resblock_backward(const Tensor<T>&, const Tensor<T>&,              \
                                                const Tensor<T>&, ResblockTape<T>&,              \
                                                const ConvSpec&, const ExecOpts&);

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

}  // namespace srnet
