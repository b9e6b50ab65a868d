#ifndef HYDOT_UTIL_HPP
#define HYDOT_UTIL_HPP

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hydot {
namespace util {

/// Static-chunked parallel loop over [0, n); falls back to a serial loop for
/// nthreads <= 1.  Bodies must write only to their own index.
inline void parallel_for(int n, int nthreads,
                         const std::function<void(int)>& body) {
    if (nthreads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    int workers = std::min(nthreads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
            for (int i = w; i < n; i += workers) body(i);
        });
    for (auto& t : pool) t.join();
}

inline int env_threads(int fallback) {
    const char* s = std::getenv("HYDOT_THREADS");
    if (!s) return fallback;
    int v = std::atoi(s);
    return v > 0 ? v : fallback;
}

}  // namespace util
}  // namespace hydot

#endif
