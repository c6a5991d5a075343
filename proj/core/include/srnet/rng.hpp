#pragma once

#include <cstdint>

#include "srnet/tensor.hpp"

namespace srnet {

/// Splittable counter-based generator. The draw at position k is a pure
/// function of (seed, k): the stream is reproducible from the seed alone and
/// independent of how draws were interleaved with other streams. split()
/// derives a decorrelated child stream, so workers can be seeded without
/// coordinating counters.
///
/// The integer stream uses only 64-bit integer arithmetic and is identical
/// across platforms. normal() maps pairs of draws through Box-Muller.
struct RngState {
    uint64_t seed = 0;
    uint64_t counter = 0;

    static RngState from_seed(uint64_t seed) { return RngState{seed, 0}; }

    RngState split(uint64_t stream) const;

    uint64_t next_u64();
    double uniform();                        // [0, 1)
    double normal();                         // standard normal, consumes two draws
    int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive range [lo, hi]
};

/// He initialization: zero-mean normal with stddev sqrt(2 / fan_in).
template <typename T>
Tensor<T> kaiming_init(const TensorShape& shape, int64_t fan_in, RngState& rng);

}  // namespace srnet
