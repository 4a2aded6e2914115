#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fashedit {

// Error taxonomy. Each kind maps onto a CLI exit code (see tools/).
enum class ErrorKind {
    RejectedConfig,
    Dependency,
    Shape,
    MissingApparel,
    Range,
    Vocab,
    Parse,
    EmptyPrompt,
    Numeric,
    SampleSize,
    Manifest,
    Transfer,
    ConditionMismatch,
    UnpairedViolation,
    Io,
    VerifyFailed,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

// splitmix64 finalizer; the basis of all seeding/hashing here.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(mix64(a) ^ (b * 0xd1342543de82ef95ULL + 1)); }
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) { return mix64(mix64(a, b), c); }
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c, uint64_t d) { return mix64(mix64(a, b, c), d); }

uint64_t fnv1a64(std::string_view s);
std::string hex_u64(uint64_t v);

// Counter-based generator: the i-th output is a pure function of (key, i).
// No libc distributions are used anywhere, so streams are reproducible
// across compilers and platforms.
class Rng {
public:
    explicit Rng(uint64_t key, uint64_t counter = 0) : key_(key), ctr_(counter) {}

    uint64_t next_u64() { return mix64(key_, ctr_++); }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_pos() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // standard normal via Box-Muller (two draws per call, no cached pair)
    double normal();

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n);

    uint64_t key() const { return key_; }
    uint64_t counter() const { return ctr_; }
    void set_state(uint64_t key, uint64_t counter) { key_ = key; ctr_ = counter; }

private:
    uint64_t key_;
    uint64_t ctr_;
};

// Runs fn(i) for i in [0, n) on `threads` workers (static block partition).
// Workers only write to disjoint output slots, so results are independent
// of the thread count; reductions over slots stay in index order.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

int effective_threads(int requested);  // 0 -> hardware_concurrency

}  // namespace fashedit
