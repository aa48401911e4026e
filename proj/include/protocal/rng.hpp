#pragma once

#include <cmath>
#include <cstdint>

namespace protocal {

// splitmix64: a counter-style generator (state advances by a fixed gamma,
// output is a bijective mix of the counter). Every source of randomness in
// the engine flows from one 64-bit seed through this class, so results are
// reproducible bit-for-bit given (seed, call order). Gaussians use the
// Marsaglia polar method to avoid libm trig differences.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform double in [0, 1), 53 random bits
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, bound); rejection sampling keeps it unbiased
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = -bound % bound; // 2^64 mod bound
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // standard normal draw
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * m;
        have_cached_ = true;
        return u * m;
    }

    // independent derived stream; forking does not disturb this generator
    Rng fork(std::uint64_t stream) const {
        Rng t(state_ + 0x9E3779B97F4A7C15ull * (stream + 1));
        return Rng(t.next_u64());
    }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

} // namespace protocal
