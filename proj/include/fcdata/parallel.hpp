#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace fcdata {

/// Calls fn(i) for every i in [0, n) with at most `parallelism` calls running
/// at once. fn must not throw; callers record per-item failures themselves.
template <class Fn>
void bounded_for_each(std::size_t n, std::size_t parallelism, Fn&& fn) {
    const std::size_t workers = std::min(std::max<std::size_t>(parallelism, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace fcdata
