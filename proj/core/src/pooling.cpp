#include "srnet/pooling.hpp"

#include <stdexcept>

namespace srnet {

template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& input, const ExecOpts& opts) {
    const auto& s = input.shape;
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        throw std::invalid_argument("maxpool2: spatial extents must be even, got " + s.str());
    }
    MaxPoolResult<T> r;
    r.output = Tensor<T>({s.n, s.c, s.h / 2, s.w / 2});
    r.indices.in_shape = s;
    r.indices.out_shape = r.output.shape;
    r.indices.idx.resize(static_cast<size_t>(r.output.elems()));

    const int64_t oh = s.h / 2, ow = s.w / 2;
    parallel_for(0, s.n * s.c, opts, [&](int64_t pl) {
        const int64_t b = pl / s.c, c = pl % s.c;
        const T* src = input.plane(b, c);
        T* dst = r.output.plane(b, c);
        int32_t* ind = r.indices.idx.data() + pl * oh * ow;
        for (int64_t y = 0; y < oh; ++y) {
            for (int64_t x = 0; x < ow; ++x) {
                // Visit the window in flat order; strict > keeps the first
                // (row-major smallest) index on ties.
                int64_t best = (2 * y) * s.w + 2 * x;
                T bv = src[best];
                const int64_t cand[3] = {(2 * y) * s.w + 2 * x + 1, (2 * y + 1) * s.w + 2 * x,
                                         (2 * y + 1) * s.w + 2 * x + 1};
                for (int64_t pos : cand) {
                    if (src[pos] > bv) {
                        bv = src[pos];
                        best = pos;
                    }
                }
                dst[y * ow + x] = bv;
                ind[y * ow + x] = static_cast<int32_t>(best);
            }
        }
    });
    return r;
}

namespace {

void check_indices(const PoolIndices& indices, const TensorShape& pooled, const char* op) {
    if (indices.out_shape != pooled) {
        throw std::invalid_argument(std::string(op) + ": tensor shaped " + pooled.str() +
                                    " does not match pool output " + indices.out_shape.str());
    }
    if (indices.idx.size() != static_cast<size_t>(pooled.elems())) {
        throw std::invalid_argument(std::string(op) + ": index count mismatch");
    }
}

}  // namespace

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, PoolIndices& indices, const ExecOpts& opts) {
    check_indices(indices, grad_out.shape, "maxpool2 backward");
    if (indices.consumed) throw std::runtime_error("maxpool2 backward: indices already consumed");
    indices.consumed = true;

    Tensor<T> grad_in = Tensor<T>::zeros(indices.in_shape);
    const int64_t n_out = indices.out_shape.h * indices.out_shape.w;
    parallel_for(0, grad_out.shape.n * grad_out.shape.c, opts, [&](int64_t pl) {
        const int64_t b = pl / grad_out.shape.c, c = pl % grad_out.shape.c;
        const T* gsrc = grad_out.plane(b, c);
        T* gdst = grad_in.plane(b, c);
        const int32_t* ind = indices.idx.data() + pl * n_out;
        for (int64_t i = 0; i < n_out; ++i) gdst[ind[i]] = gsrc[i];
    });
    return grad_in;
}

template <typename T>
Tensor<T> maxunpool2_forward(const Tensor<T>& input, const PoolIndices& indices,
                             const TensorShape& out_shape, const ExecOpts& opts) {
    check_indices(indices, input.shape, "maxunpool2");
    if (indices.in_shape != out_shape) {
        throw std::invalid_argument("maxunpool2: requested output " + out_shape.str() +
                                    " but the indices came from a pool over " +
                                    indices.in_shape.str());
    }
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    const int64_t n_in = input.shape.h * input.shape.w;
    parallel_for(0, input.shape.n * input.shape.c, opts, [&](int64_t pl) {
        const int64_t b = pl / input.shape.c, c = pl % input.shape.c;
        const T* src = input.plane(b, c);
        T* dst = out.plane(b, c);
        const int32_t* ind = indices.idx.data() + pl * n_in;
        for (int64_t i = 0; i < n_in; ++i) dst[ind[i]] = src[i];
    });
    return out;
}

template <typename T>
Tensor<T> maxunpool2_backward(const Tensor<T>& grad_out, const PoolIndices& indices,
                              const ExecOpts& opts) {
    if (grad_out.shape != indices.in_shape) {
        throw std::invalid_argument("maxunpool2 backward: grad shaped " + grad_out.shape.str() +
                                    ", unpool produced " + indices.in_shape.str());
    }
    Tensor<T> grad_in(indices.out_shape);
    const int64_t n_in = indices.out_shape.h * indices.out_shape.w;
    parallel_for(0, grad_out.shape.n * grad_out.shape.c, opts, [&](int64_t pl) {
        const int64_t b = pl / grad_out.shape.c, c = pl % grad_out.shape.c;
        const T* gsrc = grad_out.plane(b, c);
        T* gdst = grad_in.plane(b, c);
        const int32_t* ind = indices.idx.data() + pl * n_in;
        for (int64_t i = 0; i < n_in; ++i) gdst[i] = gsrc[ind[i]];
    });
    return grad_in;
}

#define SRNET_INSTANTIATE(T)                                                                    \
    template struct MaxPoolResult<T>;                                                           \
    template MaxPoolResult<T> maxpool2_forward(const Tensor<T>&, const ExecOpts&);              \
    template Tensor<T> maxpool2_backward(const Tensor<T>&, PoolIndices&, const ExecOpts&);      \
    template Tensor<T> maxunpool2_forward(const Tensor<T>&, const PoolIndices&,                 \
                                          const TensorShape&, const ExecOpts&);                 \
    template Tensor<T> maxunpool2_backward(const Tensor<T>&, const PoolIndices&, const ExecOpts&);

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

}  // namespace srnet
