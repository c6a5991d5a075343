#pragma once

#include <cstdint>
#include <functional>

namespace srnet {

/// Worker-count knob threaded through the kernels. 0 means "use all cores".
struct ExecOpts {
    int threads = 0;
    int resolved() const;
};

/// Runs fn(i) for i in [begin, end) across at most opts.threads workers.
/// Iterations are partitioned into contiguous blocks, one block per worker,
/// so a given index always runs whole on one thread; kernels that write
/// disjoint outputs per index stay bit-deterministic under any thread count.
void parallel_for(int64_t begin, int64_t end, const ExecOpts& opts,
                  const std::function<void(int64_t)>& fn);

}  // namespace srnet
