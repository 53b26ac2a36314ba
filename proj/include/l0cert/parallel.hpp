// Index-deterministic parallel execution.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace l0cert {

inline unsigned default_jobs() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Runs fn(chunk_index) for chunk_index in [0, chunks) on up to `jobs`
/// threads. Each chunk is identified by its index, never by worker identity,
/// so any result keyed on the chunk index is independent of `jobs`.
template <typename Fn>
void parallel_for_chunks(std::size_t chunks, unsigned jobs, Fn&& fn) {
    jobs = std::max(1u, jobs);
    if (jobs == 1 || chunks <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            fn(c);
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = std::min<std::size_t>(jobs, chunks);
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

} // namespace l0cert
