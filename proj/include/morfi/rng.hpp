#pragma once

#include <cmath>
#include <cstdint>

namespace morfi {

// Counter-based generator: every draw is a pure function of (seed, stream, counter).
// Streams keyed by e.g. a bootstrap replicate index give bit-identical results no
// matter how work is scheduled across threads.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t stream) : key_(mix(mix(seed) ^ stream)), ctr_(0) {}

    uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++ctr_); }

    // uniform in [0,1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), unbiased (Lemire with rejection)
    uint64_t next_below(uint64_t n) {
        if (n <= 1) return 0;
        while (true) {
            uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            uint64_t lo = static_cast<uint64_t>(m);
            if (lo >= n || lo >= (0ULL - n) % n) return static_cast<uint64_t>(m >> 64);
        }
    }

    // standard normal via Box-Muller, no cached second value (keeps draws counter-pure)
    double next_gaussian() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; // (0,1]
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    static uint64_t mix(uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    uint64_t key_;
    uint64_t ctr_;
};

} // namespace morfi
