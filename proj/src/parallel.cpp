#include "fbsde/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace fbsde {

namespace {
std::atomic<unsigned> g_max_workers{0};
}

void set_max_workers(unsigned workers) { g_max_workers.store(workers); }

unsigned max_workers() {
    unsigned w = g_max_workers.load();
    if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
    return w;
}

void for_each_block(std::size_t n,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t blocks = block_count(n);
    if (blocks == 0) return;
    const std::size_t workers = std::min<std::size_t>(max_workers(), blocks);

    auto run_block = [&](std::size_t b) {
        const std::size_t begin = b * kPathBlock;
        fn(b, begin, std::min(n, begin + kPathBlock));
    };

    if (workers <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(blocks);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t b = next++; b < blocks; b = next++) {
                try {
                    run_block(b);
                } catch (...) {
                    errors[b] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    // Lowest block wins so the reported error does not depend on scheduling.
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace fbsde
