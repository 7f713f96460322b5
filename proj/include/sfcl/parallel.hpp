// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sfcl {

/// Worker count used when the caller passes 0.
inline int default_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

/// Calls fn(i) for i in [0, count) on up to `workers` threads. Tasks write to
/// their own slot, so results do not depend on scheduling. If tasks throw, the
/// exception of the lowest failing index is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    if (workers <= 0) workers = default_workers();
    const auto nthreads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), count));
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mu;
    std::size_t failed_index = count;
    std::exception_ptr error;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    error = std::current_exception();
                }
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace sfcl
