#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nls::par {

// Run f(0..n-1) on a bounded pool and gather results in index order, so the
// output is deterministic whatever the scheduling. The first exception wins
// and is rethrown after all workers drain.
template <class T, class F>
std::vector<T> map(std::size_t n, int workers, F&& f) {
    std::vector<T> out(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> bail{false};
    std::exception_ptr first_error;
    std::mutex err_mx;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || bail.load()) return;
            try {
                out[i] = f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mx);
                if (!first_error) first_error = std::current_exception();
                bail.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int k = std::min<std::size_t>(workers, n);
    for (int w = 0; w < k; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

} // namespace nls::par
