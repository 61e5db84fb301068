#ifndef CEAUDIT_RNG_HPP
#define CEAUDIT_RNG_HPP

#include <cmath>
#include <cstdint>

// Counter-derived random streams. Every consumer derives its own stream from
// (master seed, index...) so results never depend on execution order or
// thread count. Gaussian draws use the Box-Muller cosine branch with exactly
// two uniforms per value; this mapping is fixed for byte-reproducibility.
namespace ceaudit::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// Independent stream for a (master, a, b) triple, e.g. (seed, unit, node).
inline SplitMix64 derive_stream(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = mix64(master ^ 0x5bf03635f0e3b8c9ULL);
    s = mix64(s ^ (a + 0x165667b19e3779f9ULL) * 0xd1342543de82ef95ULL);
    s = mix64(s ^ (b + 0x9e3779b97f4a7c15ULL) * 0xaf251af3b0f025b5ULL);
    return SplitMix64{s};
}

// Uniform on the open interval (0, 1); never returns 0 or 1.
inline double uniform01(SplitMix64& g) {
    return (static_cast<double>(g.next() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double gaussian(SplitMix64& g, double mu, double sigma) {
    const double u1 = uniform01(g);
    const double u2 = uniform01(g);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mu + sigma * z;
}

inline double bernoulli(SplitMix64& g, double p) {
    return uniform01(g) < p ? 1.0 : 0.0;
}

inline double uniform_in(SplitMix64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

}  // namespace ceaudit::rng

#endif  // CEAUDIT_RNG_HPP
