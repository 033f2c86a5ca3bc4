#ifndef MVELA_PARALLEL_HPP
#define MVELA_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mvela {

// Runs fn(i) for i in [0, n). Work items must be independent; callers derive
// per-item seeds from the item index so the result matches a serial run.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn)
{
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next = n;
                }
            }
        });
    }
    workers.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace mvela

#endif
