#include "tamex/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace tamex {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() {
    const int n = g_max_threads.load();
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int workers = static_cast<int>(std::min<std::int64_t>(max_threads(), n));
    if (workers <= 1) {
        fn(0, n);
        return;
    }

    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::atomic<bool> has_error{false};
    const std::int64_t chunk = (n + workers - 1) / workers;

    for (int w = 0; w < workers; ++w) {
        const std::int64_t b = w * chunk;
        const std::int64_t e = std::min<std::int64_t>(b + chunk, n);
        if (b >= e) break;
        pool.emplace_back([&, b, e] {
            try {
                fn(b, e);
            } catch (...) {
                bool expected = false;
                if (has_error.compare_exchange_strong(expected, true))
                    first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tamex
