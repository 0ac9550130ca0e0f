#include "morfi/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <vector>

namespace morfi {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_blocks(int n_blocks, int n_threads, const std::function<void(int)>& fn) {
    if (n_blocks <= 0) return;
    n_threads = resolve_threads(n_threads);
    if (n_threads > n_blocks) n_threads = n_blocks;

    if (n_threads == 1) {
        for (int b = 0; b < n_blocks; ++b) fn(b);
        return;
    }

    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            int b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_blocks) return;
            try {
                fn(b);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n_blocks, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace morfi
