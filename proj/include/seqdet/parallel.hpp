#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace seqdet {

/*
 * Replicate ranges are carved into a fixed number of chunks that does not
 * depend on the worker count, and per-chunk partials are folded in chunk
 * order; a plan therefore reduces to the same bits whether it ran on one
 * thread or many.
 */

inline int effective_threads(int hint) {
    if (hint > 0) return hint;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs body(chunk_index, begin, end) over [0, n) split into fixed chunks.
template <class Body>
void parallel_chunks(std::int64_t n, int threads_hint, const Body& body) {
    if (n <= 0) return;
    const int threads = effective_threads(threads_hint);
    const std::int64_t n_chunks = std::min<std::int64_t>(n, 256);
    const std::int64_t per = n / n_chunks;
    const std::int64_t extra = n % n_chunks;
    auto chunk_bounds = [&](std::int64_t c) {
        const std::int64_t begin = c * per + std::min(c, extra);
        const std::int64_t end = begin + per + (c < extra ? 1 : 0);
        return std::pair<std::int64_t, std::int64_t>{begin, end};
    };
    if (threads == 1 || n < 2) {
        for (std::int64_t c = 0; c < n_chunks; ++c) {
            auto [b, e] = chunk_bounds(c);
            body(c, b, e);
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::int64_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            auto [b, e] = chunk_bounds(c);
            body(c, b, e);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads - 1));
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

inline constexpr std::int64_t kReduceChunks = 256;

}  // namespace seqdet
