#include "srnet/upsample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srnet {

namespace {

struct Taps {
    int64_t lo, hi;
    double w_hi;  // weight of the hi tap; lo gets 1 - w_hi
};

Taps taps_for(int64_t out_pos, int64_t in_extent) {
    const double src = (static_cast<double>(out_pos) + 0.5) / 2.0 - 0.5;
    double lo_f = std::floor(src);
    double frac = src - lo_f;
    int64_t lo = static_cast<int64_t>(lo_f);
    int64_t hi = lo + 1;
    lo = std::clamp<int64_t>(lo, 0, in_extent - 1);
    hi = std::clamp<int64_t>(hi, 0, in_extent - 1);
    return Taps{lo, hi, frac};
}

}  // namespace

template <typename T>
Tensor<T> bilinear_upsample2(const Tensor<T>& input, const ExecOpts& opts) {
    const auto& s = input.shape;
    Tensor<T> out({s.n, s.c, 2 * s.h, 2 * s.w});
    parallel_for(0, s.n * s.c, opts, [&](int64_t pl) {
        const T* src = input.plane(pl / s.c, pl % s.c);
        T* dst = out.plane(pl / s.c, pl % s.c);
        for (int64_t y = 0; y < 2 * s.h; ++y) {
            const Taps ty = taps_for(y, s.h);
            for (int64_t x = 0; x < 2 * s.w; ++x) {
                const Taps tx = taps_for(x, s.w);
                // Nested lerp form: exact when the four taps are equal, so
                // constant planes stay bit-constant.
                const double top = src[ty.lo * s.w + tx.lo] +
                                   tx.w_hi * (static_cast<double>(src[ty.lo * s.w + tx.hi]) -
                                              src[ty.lo * s.w + tx.lo]);
                const double bot = src[ty.hi * s.w + tx.lo] +
                                   tx.w_hi * (static_cast<double>(src[ty.hi * s.w + tx.hi]) -
                                              src[ty.hi * s.w + tx.lo]);
                dst[y * 2 * s.w + x] = static_cast<T>(top + ty.w_hi * (bot - top));
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> bilinear_upsample2_backward(const Tensor<T>& grad_out, const TensorShape& in_shape,
                                      const ExecOpts& opts) {
    const TensorShape want{in_shape.n, in_shape.c, 2 * in_shape.h, 2 * in_shape.w};
    if (grad_out.shape != want) {
        throw std::invalid_argument("bilinear backward: grad shaped " + grad_out.shape.str() +
                                    ", want " + want.str());
    }
    Tensor<T> grad_in = Tensor<T>::zeros(in_shape);
    parallel_for(0, in_shape.n * in_shape.c, opts, [&](int64_t pl) {
        const T* gsrc = grad_out.plane(pl / in_shape.c, pl % in_shape.c);
        T* gdst = grad_in.plane(pl / in_shape.c, pl % in_shape.c);
        for (int64_t y = 0; y < 2 * in_shape.h; ++y) {
            const Taps ty = taps_for(y, in_shape.h);
            for (int64_t x = 0; x < 2 * in_shape.w; ++x) {
                const Taps tx = taps_for(x, in_shape.w);
                const double gv = static_cast<double>(gsrc[y * 2 * in_shape.w + x]);
                gdst[ty.lo * in_shape.w + tx.lo] +=
                    static_cast<T>((1.0 - ty.w_hi) * (1.0 - tx.w_hi) * gv);
                gdst[ty.lo * in_shape.w + tx.hi] += static_cast<T>((1.0 - ty.w_hi) * tx.w_hi * gv);
                gdst[ty.hi * in_shape.w + tx.lo] += static_cast<T>(ty.w_hi * (1.0 - tx.w_hi) * gv);
                gdst[ty.hi * in_shape.w + tx.hi] += static_cast<T>(ty.w_hi * tx.w_hi * gv);
            }
        }
    });
    return grad_in;
}

#define SRNET_INSTANTIATE(T)                                                     \
    template Tensor<T> bilinear_upsample2(const Tensor<T>&, const ExecOpts&);    \
    template Tensor<T> bilinear_upsample2_backward(const Tensor<T>&, const TensorShape&, \
                                                   const ExecOpts&);

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

}  // namespace srnet
