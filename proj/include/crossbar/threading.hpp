#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace crossbar {

// Static contiguous partition of [0, count) over at most max_threads workers.
// The partition depends only on (count, max_threads), so per-item outputs are
// placed identically regardless of scheduling.
inline void parallel_for(long count, int max_threads,
                         const std::function<void(long begin, long end, int worker)>& body) {
    if (count <= 0) return;
    int workers = max_threads < 1 ? 1 : max_threads;
    if (static_cast<long>(workers) > count) workers = static_cast<int>(count);
    if (workers == 1) {
        body(0, count, 0);
        return;
    }
    const long chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        const long b = t * chunk;
        const long e = std::min(count, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e, t] { body(b, e, t); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace crossbar
