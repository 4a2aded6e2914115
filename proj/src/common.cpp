#include "fashedit/common.hpp"

#include <cmath>
#include <thread>

namespace fashedit {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_u64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

double Rng::normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) fail(ErrorKind::Range, "uniform_int: n must be positive");
    // Lemire's multiply-shift with rejection; unbiased and deterministic.
    uint64_t x = next_u64();
    __uint128_t m = (__uint128_t)x * (__uint128_t)n;
    uint64_t l = (uint64_t)m;
    if (l < n) {
        uint64_t t = (0 - n) % n;
        while (l < t) {
            x = next_u64();
            m = (__uint128_t)x * (__uint128_t)n;
            l = (uint64_t)m;
        }
    }
    return (uint64_t)(m >> 64);
}

int effective_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : (int)hc;
}

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn) {
    threads = effective_threads(threads);
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    int nw = (int)std::min<int64_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    std::vector<std::exception_ptr> errs(nw);
    for (int w = 0; w < nw; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int64_t i = w; i < n; i += nw) fn(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace fashedit
