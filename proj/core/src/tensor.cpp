#include "srnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace srnet {

std::string TensorShape::str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
}

void validate_shape(const TensorShape& s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
        throw std::invalid_argument("tensor shape extents must all be >= 1, got " + s.str());
    }
    // Reject element counts that overflow the product chain.
    const int64_t lim = std::numeric_limits<int64_t>::max();
    int64_t e = s.n;
    for (int64_t d : {s.c, s.h, s.w}) {
        if (e > lim / d) throw std::invalid_argument("tensor shape overflows element count: " + s.str());
        e *= d;
    }
    if (e > lim / static_cast<int64_t>(sizeof(double))) {
        throw std::invalid_argument("tensor shape overflows addressable range: " + s.str());
    }
}

template <typename T>
Tensor<T>::Tensor(const TensorShape& s, T fill) : shape(s) {
    validate_shape(s);
    data.assign(static_cast<size_t>(s.elems()), fill);
}

template <typename T>
bool Tensor<T>::same_bits(const Tensor& other) const {
    if (shape != other.shape) return false;
    return std::memcmp(data.data(), other.data.data(), data.size() * sizeof(T)) == 0;
}

namespace {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape != b.shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape.str() +
                                    " vs " + b.shape.str());
    }
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    Tensor<T> r(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] + b.data[i];
    return r;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    Tensor<T> r(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] - b.data[i];
    return r;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    Tensor<T> r(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] * b.data[i];
    return r;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> r(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] * s;
    return r;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    Tensor<T> r(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) r.data[i] = a.data[i] > T(0) ? a.data[i] : T(0);
    return r;
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    Tensor<T> r(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) r.data[i] = std::abs(a.data[i]);
    return r;
}

template <typename T>
void add_(Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add_");
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

template <typename T>
void sub_(Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub_");
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] -= b.data[i];
}

template <typename T>
void scale_(Tensor<T>& a, T s) {
    for (T& v : a.data) v *= s;
}

template <typename T>
void fill_(Tensor<T>& a, T v) {
    for (T& x : a.data) x = v;
}

template <typename T>
T sum(const Tensor<T>& a) {
    T s = T(0);
    for (T v : a.data) s += v;
    return s;
}

template <typename T>
T max_abs(const Tensor<T>& a) {
    T m = T(0);
    for (T v : a.data) m = std::max(m, std::abs(v));
    return m;
}

template <typename T>
int64_t count_nonzero(const Tensor<T>& a) {
    int64_t n = 0;
    for (T v : a.data) n += (v != T(0));
    return n;
}

template <typename T>
bool all_finite(const Tensor<T>& a) {
    for (T v : a.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template <typename T>
void require_finite(const Tensor<T>& a, const char* what) {
    if (!all_finite(a)) {
        throw std::runtime_error(std::string("non-finite values in ") + what);
    }
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& a) {
    Tensor<To> r(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) r.data[i] = static_cast<To>(a.data[i]);
    return r;
}

#define SRNET_INSTANTIATE(T)                                          \
    template struct Tensor<T>;                                        \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);       \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);       \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);       \
    template Tensor<T> scale(const Tensor<T>&, T);                    \
    template Tensor<T> relu(const Tensor<T>&);                        \
    template Tensor<T> abs(const Tensor<T>&);                         \
    template void add_(Tensor<T>&, const Tensor<T>&);                 \
    template void sub_(Tensor<T>&, const Tensor<T>&);                 \
    template void scale_(Tensor<T>&, T);                              \
    template void fill_(Tensor<T>&, T);                               \
    template T sum(const Tensor<T>&);                                 \
    template T max_abs(const Tensor<T>&);                             \
    template int64_t count_nonzero(const Tensor<T>&);                 \
    template bool all_finite(const Tensor<T>&);                       \
    template void require_finite(const Tensor<T>&, const char*);

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

template Tensor<double> cast<double, float>(const Tensor<float>&);
template Tensor<float> cast<float, double>(const Tensor<double>&);
template Tensor<float> cast<float, float>(const Tensor<float>&);
template Tensor<double> cast<double, double>(const Tensor<double>&);

}  // namespace srnet
