#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace geoconform {

/// Worker cap: GEOCONFORM_THREADS if set (minimum 1), else the hardware
/// concurrency.
inline unsigned thread_cap() {
    if (const char* env = std::getenv("GEOCONFORM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs fn(0..n-1), possibly in parallel. Tasks must write only to their
/// own slot so results are independent of scheduling. The lowest-index
/// exception wins, keeping error reporting deterministic too.
inline void parallel_for_index(std::size_t n, unsigned max_threads,
                               const std::function<void(std::size_t)>& fn) {
    const unsigned workers = static_cast<unsigned>(
        std::min<std::size_t>(n, max_threads > 0 ? max_threads : 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace geoconform
