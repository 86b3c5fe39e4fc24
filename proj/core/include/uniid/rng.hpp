#pragma once

#include <cstdint>
#include <random>

namespace uniid {

// Single explicit generator threaded through all stochastic code. No global
// hidden state; every training run, sampler and dataset builder owns one.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    // Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
    }

    double normal() { return normal_(engine_); }

    uint64_t seed() const { return seed_; }

    // Independent stream derived from the original seed and a stream id, so
    // every sample / image gets its own reproducible noise sequence
    // regardless of evaluation order.
    Rng derive(uint64_t stream_id) const {
        uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
        // splitmix64 finalizer
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return Rng(x);
    }

private:
    uint64_t seed_ = 0;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

} // namespace uniid
