#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace m2ae {

// splitmix64 step; also used to derive child seeds from a parent seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic seed combination, order sensitive.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2));
    return splitmix64(s);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

// Small deterministic generator. We roll our own instead of using
// std::normal_distribution because libstdc++/libc++ disagree on the
// sampling algorithm and every test in this repo pins exact streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, one sample per draw.
    double normal(double mean = 0.0, double std_dev = 1.0) {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + std_dev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.empty()) return;
        for (std::uint64_t i = items.size() - 1; i > 0; --i) {
            std::uint64_t j = uniform_index(i + 1);
            std::swap(items[i], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace m2ae
