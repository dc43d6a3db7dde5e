#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ssfer {

// worker count: SSFER_THREADS caps it, default = hardware concurrency
inline int thread_count() {
    static const int n = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("SSFER_THREADS")) {
            const int req = std::atoi(env);
            if (req >= 1 && req < hw) hw = req;
            if (req >= 1 && req >= hw) hw = req <= 64 ? req : 64;
        }
        return hw;
    }();
    return n;
}

// Runs fn(chunk_index, begin, end) over [0,n) split into fixed-size chunks.
// Chunking is independent of the worker count, so callers that keep one
// accumulator per chunk and reduce in chunk order get results that do not
// depend on SSFER_THREADS.
inline constexpr int kGradChunk = 8;

inline int chunk_count(int n, int chunk = kGradChunk) {
    return n <= 0 ? 0 : (n + chunk - 1) / chunk;
}

inline void parallel_chunks(int n, const std::function<void(int, int, int)>& fn,
                            int chunk = kGradChunk) {
    const int nchunks = chunk_count(n, chunk);
    if (nchunks == 0) return;
    const int workers = std::min(thread_count(), nchunks);
    if (workers <= 1) {
        for (int c = 0; c < nchunks; ++c)
            fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int c = next.fetch_add(1);
                if (c >= nchunks) return;
                fn(c, c * chunk, std::min(n, (c + 1) * chunk));
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace ssfer
