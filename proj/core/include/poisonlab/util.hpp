#pragma once

#include <cstdint>
#include <vector>

namespace poisonlab {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic stream of uniforms; draws do not depend on the standard
/// library's distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    int next_index(int n) { return static_cast<int>(next_double() * n) % n; }

    /// Sample an index from an unnormalized nonnegative weight vector.
    int next_weighted(const std::vector<double>& weights, double total) {
        double u = next_double() * total;
        for (size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

private:
    uint64_t state_;
};

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) { return splitmix64(seed * 0x9e3779b97f4a7c15ULL + stream); }

}  // namespace poisonlab
