#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace fws {

// splitmix64 step; mutates state and returns the next output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed plus up to two stream
// tags. Used everywhere a component needs its own generator (per antenna,
// per class, per episode, ...) so that no two components share a sequence
// and adding a consumer never shifts another consumer's draws.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a,
                                 std::uint64_t tag_b = 0) {
    std::uint64_t s = base ^ 0x6a09e667f3bcc909ull;
    splitmix64(s);
    s ^= tag_a + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
    splitmix64(s);
    s ^= tag_b + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
    return splitmix64(s);
}

// Deterministic random source. The engine is std::mt19937_64 (its output
// sequence is pinned by the standard); the distributions are implemented
// here by hand because std:: distributions are implementation-defined and
// would break frozen expected values across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased-enough bounded draw (Lemire multiply-shift). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        const auto wide = static_cast<unsigned __int128>(eng_()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

    // Standard Box-Muller, caching the second variate.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + stddev * r * std::cos(a);
    }

    // Fisher-Yates, back to front.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fws
