#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace srnet {

/// Extents of a dense rank-4 activation/parameter tensor, NCHW order.
struct TensorShape {
    int64_t n = 0;  // batch
    int64_t c = 0;  // channels
    int64_t h = 0;  // rows
    int64_t w = 0;  // columns

    int64_t elems() const { return n * c * h * w; }
    bool operator==(const TensorShape&) const = default;
    std::string str() const;
};

/// Throws std::invalid_argument unless every extent is >= 1 and the element
/// count fits the addressable range.
void validate_shape(const TensorShape& s);

/// Dense rank-4 tensor. Contiguous row-major (batch, channel, row, column)
/// storage: element (b,c,y,x) lives at ((b*C + c)*H + y)*W + x.
///
/// Tensors are plain values: copying copies the buffer, there is no view
/// aliasing. Mutation happens through non-const element access or the
/// explicitly in-place helpers below; everything else returns new tensors.
template <typename T>
struct Tensor {
    TensorShape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(const TensorShape& s, T fill = T(0));

    static Tensor zeros(const TensorShape& s) { return Tensor(s, T(0)); }
    static Tensor ones(const TensorShape& s) { return Tensor(s, T(1)); }
    static Tensor full(const TensorShape& s, T value) { return Tensor(s, value); }

    int64_t elems() const { return static_cast<int64_t>(data.size()); }

    int64_t offset(int64_t b, int64_t c, int64_t y, int64_t x) const {
        return ((b * shape.c + c) * shape.h + y) * shape.w + x;
    }
    T& at(int64_t b, int64_t c, int64_t y, int64_t x) { return data[offset(b, c, y, x)]; }
    const T& at(int64_t b, int64_t c, int64_t y, int64_t x) const { return data[offset(b, c, y, x)]; }

    T* plane(int64_t b, int64_t c) { return data.data() + (b * shape.c + c) * shape.h * shape.w; }
    const T* plane(int64_t b, int64_t c) const {
        return data.data() + (b * shape.c + c) * shape.h * shape.w;
    }

    bool same_bits(const Tensor& other) const;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Elementwise arithmetic. Binary ops demand identical shapes; there is no
// broadcasting beyond the scalar overloads.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> abs(const Tensor<T>& a);

// In-place variants (PyTorch-style trailing underscore marks mutation).
template <typename T> void add_(Tensor<T>& a, const Tensor<T>& b);
template <typename T> void sub_(Tensor<T>& a, const Tensor<T>& b);
template <typename T> void scale_(Tensor<T>& a, T s);
template <typename T> void fill_(Tensor<T>& a, T v);

// Reductions.
template <typename T> T sum(const Tensor<T>& a);
template <typename T> T max_abs(const Tensor<T>& a);
template <typename T> int64_t count_nonzero(const Tensor<T>& a);
template <typename T> bool all_finite(const Tensor<T>& a);

/// Throws std::runtime_error naming `what` if the tensor holds NaN/Inf.
template <typename T> void require_finite(const Tensor<T>& a, const char* what);

template <typename To, typename From> Tensor<To> cast(const Tensor<From>& a);

}  // namespace srnet
