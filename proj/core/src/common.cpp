#include "pantcr/common.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

namespace pantcr {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t master, uint64_t tag) {
    return mix64(mix64(master) ^ mix64(tag * 0xd6e8feb86659fd93ull + 1));
}

uint64_t derive_seed(uint64_t master, const std::string& tag) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return derive_seed(master, h);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

int Rng::integer(int n) {
    if (n <= 0) throw ArgumentError("Rng::integer: n must be positive");
    // rejection-free modulo is fine here; bias is < 2^-50 for any sane n
    return int(raw() % uint64_t(n));
}

int thread_budget() {
    static int budget = [] {
        int hw = int(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("PANTCR_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) hw = std::min(hw, v);
        }
        return hw;
    }();
    return budget;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    int workers = std::min(thread_budget(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([=, &fn] {
            for (int i = t; i < n; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace pantcr
