#pragma once

// Chunked parallel-for whose results are independent of the thread count:
// work is split into fixed-size chunks keyed by index, each chunk writes its
// own output slot, and any reduction happens sequentially in chunk order.

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace kkl {

inline int hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// fn(chunk_index, begin, end) over [0, n) in chunks of chunk_size.
inline void parallel_chunks(long n, long chunk_size, int threads,
                            const std::function<void(long, long, long)>& fn) {
    if (n <= 0) return;
    const long n_chunks = (n + chunk_size - 1) / chunk_size;
    if (threads <= 1 || n_chunks == 1) {
        for (long c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<long> next{0};
    auto worker = [&]() {
        for (;;) {
            const long c = next.fetch_add(1);
            if (c >= n_chunks) return;
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<long>(threads, n_chunks);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace kkl
