#include "rgns/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace rgns {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) {
    g_threads.store(std::max(1, n));
}

int threads() {
    return g_threads.load();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const int nt = threads();
    if (n == 0) return;
    if (nt <= 1 || n < 2 * static_cast<std::size_t>(nt)) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt) - 1);
    for (int w = 1; w < nt; ++w) {
        const std::size_t lo = std::min(n, chunk * static_cast<std::size_t>(w));
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    body(0, std::min(n, chunk));
    for (auto& t : pool) t.join();
}

}  // namespace rgns
