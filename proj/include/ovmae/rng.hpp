#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "ovmae/errors.hpp"

namespace ovmae {

namespace detail {

// SplitMix64 output function. Maps a 64-bit counter position to a
// statistically independent 64-bit word; the whole generator is a pure
// function of (key, index), so streams are position-addressable.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

} // namespace detail

// Counter-based generator keyed by (seed, label). Child streams are derived
// from the key alone, never from the draw position, so the set of streams a
// program uses does not depend on how many values each stream has produced.
class Rng {
public:
    Rng() : key_(derive_key(0, "")) {}
    explicit Rng(std::uint64_t seed, std::string_view label = "")
        : key_(derive_key(seed, label)) {}

    Rng child(std::string_view label) const {
        Rng r;
        r.key_ = detail::splitmix64(key_ ^ detail::fnv1a64(label) ^ detail::kGamma);
        return r;
    }

    Rng child(std::uint64_t index) const {
        Rng r;
        r.key_ = detail::splitmix64(key_ + (index + 1) * detail::kGamma);
        r.key_ = detail::splitmix64(r.key_ ^ 0xd6e8feb86659fd93ULL);
        return r;
    }

    // Pure counter access; does not advance the stream.
    std::uint64_t at(std::uint64_t index) const {
        return detail::splitmix64(key_ + (index + 1) * detail::kGamma);
    }

    std::uint64_t next_u64() { return at(counter_++); }

    // Uniform in [0, 1) with 53 random bits.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Modulo bias is ~n / 2^64, far below any
    // statistical test used here.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw ParamError("Rng::next_below: n must be positive");
        return next_u64() % n;
    }

    // Box-Muller; consumes two draws per call. Avoids std::normal_distribution,
    // whose output sequence is implementation-defined.
    double next_normal() {
        double u1 = 1.0 - next_uniform(); // (0, 1]
        double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Normal truncated to |z| <= 2, then scaled; the usual transformer init.
    double next_trunc_normal(double stddev) {
        double z = next_normal();
        while (z < -2.0 || z > 2.0) z = next_normal();
        return z * stddev;
    }

    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t derive_key(std::uint64_t seed, std::string_view label) {
        std::uint64_t k = detail::splitmix64(seed + detail::kGamma);
        if (!label.empty()) k = detail::splitmix64(k ^ detail::fnv1a64(label));
        return k;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace ovmae
