#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace qvlab {

/// Run fn(i) for i in [0, n). Work is sharded by index; each index writes
/// only its own output slot, so results do not depend on the worker count.
inline void parallel_for(std::uint64_t n, const std::function<void(std::uint64_t)>& fn) {
    unsigned workers = std::thread::hardware_concurrency();
    if (workers <= 1 || n < 2 * workers) {
        for (std::uint64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::uint64_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace qvlab
