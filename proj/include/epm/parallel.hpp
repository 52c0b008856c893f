#ifndef EPM_PARALLEL_HPP
#define EPM_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace epm {

/// Runs fn(i) for i in [0, n) on at most `workers` threads. Callers write
/// results into index-addressed slots, so output never depends on scheduling.
/// The exception of the lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn)
{
    if (n == 0)
        return;
    const std::size_t threads = std::min<std::size_t>(n, workers < 1 ? 1 : static_cast<std::size_t>(workers));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::vector<std::exception_ptr> errors(n);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = cursor.fetch_add(1); i < n; i = cursor.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace epm

#endif // EPM_PARALLEL_HPP
