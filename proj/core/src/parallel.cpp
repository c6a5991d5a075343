#include "srnet/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace srnet {

int ExecOpts::resolved() const {
    if (threads > 0) return threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void parallel_for(int64_t begin, int64_t end, const ExecOpts& opts,
                  const std::function<void(int64_t)>& fn) {
    const int64_t n = end - begin;
    if (n <= 0) return;
    const int workers = static_cast<int>(std::min<int64_t>(opts.resolved(), n));
    if (workers <= 1) {
        for (int64_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int64_t lo = begin + w * chunk;
        const int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace srnet
