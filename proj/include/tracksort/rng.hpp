#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tracksort {

/// Seeded RNG with hand-rolled draw helpers. std::distributions are
/// implementation-defined; the helpers below produce the same stream on
/// every platform, which the reproducibility tests rely on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // xorshift* (Marsaglia); period 2^64-1
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dull;
    }

    /// Uniform in [0,1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    double normal() {
        // Box-Muller, one value per call (the sine twin is discarded)
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Sub-stream derivation so pipeline stages can share one top seed.
    Rng fork(std::uint64_t stream) const {
        Rng r(state_ ^ (0xbf58476d1ce4e5b9ull * (stream + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    if (items.empty()) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_index(i + 1));
        std::swap(items[i], items[j]);
    }
}

} // namespace tracksort
