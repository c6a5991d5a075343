#include "srnet/conv2d.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace srnet {

void ConvSpec::validate() const {
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("conv: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("conv: kernel must be odd and >= 1");
    if (dilation < 1) throw std::invalid_argument("conv: dilation must be >= 1");
    if (padding < 0) throw std::invalid_argument("conv: padding must be >= 0");
}

namespace {

template <typename T>
void check_forward_shapes(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                          const ConvSpec& spec) {
    spec.validate();
    if (input.shape.c != spec.in_channels) {
        throw std::invalid_argument("conv: input has " + std::to_string(input.shape.c) +
                                    " channels, spec wants " + std::to_string(spec.in_channels));
    }
    const TensorShape w_want{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    if (weights.shape != w_want) {
        throw std::invalid_argument("conv: weights shaped " + weights.shape.str() + ", want " +
                                    w_want.str());
    }
    const TensorShape b_want{1, spec.out_channels, 1, 1};
    if (bias.shape != b_want) {
        throw std::invalid_argument("conv: bias shaped " + bias.shape.str() + ", want " + b_want.str());
    }
    const int64_t oh = input.shape.h + 2 * spec.padding - spec.dilation * (spec.kernel - 1);
    const int64_t ow = input.shape.w + 2 * spec.padding - spec.dilation * (spec.kernel - 1);
    if (oh < 1 || ow < 1) {
        throw std::invalid_argument("conv: dilated kernel does not fit input " + input.shape.str());
    }
}

template <typename T>
TensorShape out_shape(const Tensor<T>& input, const ConvSpec& spec) {
    return TensorShape{input.shape.n, spec.out_channels,
                       input.shape.h + 2 * spec.padding - spec.dilation * (spec.kernel - 1),
                       input.shape.w + 2 * spec.padding - spec.dilation * (spec.kernel - 1)};
}

// Unrolls one batch item into a (C*k*k) x (OH*OW) matrix; row (ic,ky,kx) in
// that order so a plain ascending-k GEMM reduction visits taps exactly like
// the direct loops do.
template <typename T>
void im2col(const Tensor<T>& input, int64_t b, const ConvSpec& spec, int64_t oh, int64_t ow,
            std::vector<T>& cols, const ExecOpts& opts) {
    const int64_t k = spec.kernel, d = spec.dilation, p = spec.padding;
    const int64_t h = input.shape.h, w = input.shape.w;
    const int64_t n_cols = oh * ow;
    parallel_for(0, spec.in_channels * k * k, opts, [&](int64_t row) {
        const int64_t ic = row / (k * k);
        const int64_t ky = (row / k) % k;
        const int64_t kx = row % k;
        const T* src = input.plane(b, ic);
        T* dst = cols.data() + row * n_cols;
        for (int64_t y = 0; y < oh; ++y) {
            const int64_t iy = y - p + ky * d;
            if (iy < 0 || iy >= h) {
                for (int64_t x = 0; x < ow; ++x) dst[y * ow + x] = T(0);
                continue;
            }
            const T* src_row = src + iy * w;
            for (int64_t x = 0; x < ow; ++x) {
                const int64_t ix = x - p + kx * d;
                dst[y * ow + x] = (ix < 0 || ix >= w) ? T(0) : src_row[ix];
            }
        }
    });
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                         const ConvSpec& spec, std::type_identity_t<ConvTape<T>*> tape,
                         const ExecOpts& opts) {
    check_forward_shapes(input, weights, bias, spec);
    Tensor<T> out(out_shape(input, spec));
    const int64_t oh = out.shape.h, ow = out.shape.w, n_cols = oh * ow;
    const int64_t kk = spec.in_channels * spec.kernel * spec.kernel;

    std::vector<T> cols(static_cast<size_t>(kk * n_cols));
    for (int64_t b = 0; b < input.shape.n; ++b) {
        im2col(input, b, spec, oh, ow, cols, opts);
        parallel_for(0, spec.out_channels, opts, [&](int64_t oc) {
            const T* wrow = weights.data.data() + oc * kk;
            T* orow = out.plane(b, oc);
            const T bv = bias.data[static_cast<size_t>(oc)];
            for (int64_t n = 0; n < n_cols; ++n) orow[n] = bv;
            for (int64_t kidx = 0; kidx < kk; ++kidx) {
                const T wv = wrow[kidx];
                const T* crow = cols.data() + kidx * n_cols;
                for (int64_t n = 0; n < n_cols; ++n) orow[n] += wv * crow[n];
            }
        });
    }
    if (tape) {
        tape->input = input;
        tape->consumed = false;
    }
    return out;
}

template <typename T>
Tensor<T> conv2d_forward_direct(const Tensor<T>& input, const Tensor<T>& weights,
                                const Tensor<T>& bias, const ConvSpec& spec,
                                std::type_identity_t<ConvTape<T>*> tape, const ExecOpts& opts) {
    check_forward_shapes(input, weights, bias, spec);
    Tensor<T> out(out_shape(input, spec));
    const int64_t k = spec.kernel, d = spec.dilation, p = spec.padding;
    const int64_t h = input.shape.h, w = input.shape.w;
    const int64_t oh = out.shape.h, ow = out.shape.w;

    parallel_for(0, input.shape.n * spec.out_channels, opts, [&](int64_t task) {
        const int64_t b = task / spec.out_channels;
        const int64_t oc = task % spec.out_channels;
        T* orow = out.plane(b, oc);
        const T bv = bias.data[static_cast<size_t>(oc)];
        for (int64_t y = 0; y < oh; ++y) {
            for (int64_t x = 0; x < ow; ++x) {
                T acc = bv;
                for (int64_t ic = 0; ic < spec.in_channels; ++ic) {
                    const T* src = input.plane(b, ic);
                    const T* wk = weights.data.data() + ((oc * spec.in_channels + ic) * k) * k;
                    for (int64_t ky = 0; ky < k; ++ky) {
                        const int64_t iy = y - p + ky * d;
                        if (iy < 0 || iy >= h) continue;
                        for (int64_t kx = 0; kx < k; ++kx) {
                            const int64_t ix = x - p + kx * d;
                            if (ix < 0 || ix >= w) continue;
                            acc += wk[ky * k + kx] * src[iy * w + ix];
                        }
                    }
                }
                orow[y * ow + x] = acc;
            }
        }
    });
    if (tape) {
        tape->input = input;
        tape->consumed = false;
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& weights, ConvTape<T>& tape,
                             const ConvSpec& spec, const ExecOpts& opts) {
    if (tape.consumed) throw std::runtime_error("conv backward: tape already consumed");
    if (tape.input.elems() == 0) throw std::runtime_error("conv backward: empty tape");
    tape.consumed = true;
    const Tensor<T>& input = tape.input;
    check_forward_shapes(input, weights, Tensor<T>({1, spec.out_channels, 1, 1}), spec);
    const TensorShape want = out_shape(input, spec);
    if (grad_out.shape != want) {
        throw std::invalid_argument("conv backward: grad_out shaped " + grad_out.shape.str() +
                                    ", forward produced " + want.str());
    }

    const int64_t k = spec.kernel, d = spec.dilation, p = spec.padding;
    const int64_t h = input.shape.h, w = input.shape.w;
    const int64_t oh = grad_out.shape.h, ow = grad_out.shape.w, n_cols = oh * ow;
    const int64_t kk = spec.in_channels * k * k;

    ConvGrads<T> g{Tensor<T>::zeros(input.shape), Tensor<T>::zeros(weights.shape),
                   Tensor<T>::zeros({1, spec.out_channels, 1, 1})};

    // Bias: per-output-channel sum of grad_out.
    parallel_for(0, spec.out_channels, opts, [&](int64_t oc) {
        T acc = T(0);
        for (int64_t b = 0; b < grad_out.shape.n; ++b) {
            const T* gp = grad_out.plane(b, oc);
            for (int64_t n = 0; n < n_cols; ++n) acc += gp[n];
        }
        g.bias.data[static_cast<size_t>(oc)] = acc;
    });

    // Weights: accumulate gradOut x cols^T, batch items in fixed serial order.
    std::vector<T> cols(static_cast<size_t>(kk * n_cols));
    for (int64_t b = 0; b < input.shape.n; ++b) {
        im2col(input, b, spec, oh, ow, cols, opts);
        parallel_for(0, spec.out_channels, opts, [&](int64_t oc) {
            const T* gp = grad_out.plane(b, oc);
            T* gw = g.weights.data.data() + oc * kk;
            for (int64_t kidx = 0; kidx < kk; ++kidx) {
                const T* crow = cols.data() + kidx * n_cols;
                T acc = T(0);
                for (int64_t n = 0; n < n_cols; ++n) acc += gp[n] * crow[n];
                gw[kidx] += acc;
            }
        });
    }

    // Input: weights^T x gradOut into column space, then scatter (col2im).
    parallel_for(0, input.shape.n, opts, [&](int64_t b) {
        std::vector<T> colgrad(static_cast<size_t>(kk * n_cols), T(0));
        for (int64_t kidx = 0; kidx < kk; ++kidx) {
            T* crow = colgrad.data() + kidx * n_cols;
            for (int64_t oc = 0; oc < spec.out_channels; ++oc) {
                const T wv = weights.data[static_cast<size_t>(oc * kk + kidx)];
                const T* gp = grad_out.plane(b, oc);
                for (int64_t n = 0; n < n_cols; ++n) crow[n] += wv * gp[n];
            }
        }
        for (int64_t kidx = 0; kidx < kk; ++kidx) {
            const int64_t ic = kidx / (k * k);
            const int64_t ky = (kidx / k) % k;
            const int64_t kx = kidx % k;
            const T* crow = colgrad.data() + kidx * n_cols;
            T* dst = g.input.plane(b, ic);
            for (int64_t y = 0; y < oh; ++y) {
                const int64_t iy = y - p + ky * d;
                if (iy < 0 || iy >= h) continue;
                for (int64_t x = 0; x < ow; ++x) {
                    const int64_t ix = x - p + kx * d;
                    if (ix < 0 || ix >= w) continue;
                    dst[iy * w + ix] += crow[y * ow + x];
                }
            }
        }
    });
    return g;
}

#define SRNET_INSTANTIATE(T)                                                                      \
    template struct ConvTape<T>;                                                                  \
    template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                      const ConvSpec&, std::type_identity_t<ConvTape<T>*>,     \
                                      const ExecOpts&);            \
    template Tensor<T> conv2d_forward_direct(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                             const ConvSpec&, std::type_identity_t<ConvTape<T>*>,\
                                             const ExecOpts&);     \
    template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, ConvTape<T>&,       \
                                          const ConvSpec&, const ExecOpts&);

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

}  // namespace srnet
