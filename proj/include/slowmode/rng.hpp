#pragma once
#include <cstdint>
#include <cstddef>
#include <vector>

namespace slowmode {

// xoshiro256++ seeded via splitmix64. Self-contained so that streams are
// bit-identical across platforms and standard library versions (std::mt19937
// distributions are not portable).
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s) si = splitmix64(x);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        const uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // uniform in [0,1) with 53-bit resolution
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo,hi)
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // index into a cumulative-weight table (strictly increasing, last = total).
    // Linear scan: rows here have <= 9 entries.
    size_t categorical(const double* cdf, size_t n) {
        const double u = next_double() * cdf[n - 1];
        size_t j = 0;
        while (j < n - 1 && cdf[j] <= u) ++j;
        return j;
    }

private:
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t s[4];
};

} // namespace slowmode
