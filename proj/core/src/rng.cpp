#include "srnet/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace srnet {

namespace {

// SplitMix64 output function over a Weyl sequence of the counter.
uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

RngState RngState::split(uint64_t stream) const {
    // Children are keyed by (seed, stream); counter position does not leak in,
    // so split(k) names the same stream no matter when it is taken.
    return RngState{mix64(seed ^ mix64(stream + 0x9E3779B97F4A7C15ull)), 0};
}

uint64_t RngState::next_u64() {
    const uint64_t z = seed + (++counter) * 0x9E3779B97F4A7C15ull;
    return mix64(z);
}

double RngState::uniform() {
    // 53 high bits -> [0,1) double with full mantissa resolution.
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::normal() {
    // Box-Muller; u clamped away from 0 so log stays finite.
    double u = uniform();
    const double v = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u));
    return r * std::cos(2.0 * std::numbers::pi * v);
}

int64_t RngState::uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    // Multiply-shift bounded draw; bias is < 2^-64 per draw, irrelevant here,
    // and the mapping is exact integer arithmetic so it replays everywhere.
    const unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * span;
    return lo + static_cast<int64_t>(prod >> 64);
}

template <typename T>
Tensor<T> kaiming_init(const TensorShape& shape, int64_t fan_in, RngState& rng) {
    if (fan_in < 1) throw std::invalid_argument("kaiming_init: fan_in must be >= 1");
    const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor<T> t(shape);
    for (auto& v : t.data) v = static_cast<T>(sigma * rng.normal());
    return t;
}

template Tensor<float> kaiming_init<float>(const TensorShape&, int64_t, RngState&);
template Tensor<double> kaiming_init<double>(const TensorShape&, int64_t, RngState&);

}  // namespace srnet
