#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace lionflow {

namespace detail {

// SplitMix64 finalizer; the mixing step of the stream derivation below.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

// Derives independent stream seeds from a single master seed.
//
// Derivation rule (fixed per release): the 64-bit stream seed is
//   splitmix64(splitmix64(splitmix64(master ^ fnv1a(role)) + rep) + particle)
// so distinct (role, replication, particle) triples map to distinct streams
// and the map is a pure function of its inputs.
struct SeedPolicy {
    std::uint64_t master = 0;

    std::uint64_t stream(std::string_view role, std::uint64_t rep = 0,
                         std::uint64_t particle = 0) const {
        std::uint64_t h = detail::splitmix64(master ^ detail::fnv1a(role));
        h = detail::splitmix64(h + rep);
        h = detail::splitmix64(h + particle);
        return h;
    }
};

// One random stream. Gaussian variates come from the Box-Muller transform
// (pairwise, second value cached); this choice is part of the per-release
// reproducibility contract, so outputs do not depend on the standard
// library's std::normal_distribution implementation.
class RngStream {
public:
    RngStream() : eng_(0) {}
    explicit RngStream(std::uint64_t seed) : eng_(seed) {}

    double uniform() {
        // 53-bit mantissa uniform in (0, 1]; avoids log(0) in Box-Muller.
        const std::uint64_t r = eng_();
        return (static_cast<double>(r >> 11) + 1.0) * 0x1p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace lionflow
