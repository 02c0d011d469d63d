#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>

namespace mdrn {

/// Seeded random stream with hierarchical derivation. Every source of
/// randomness in the toolkit is a pure function of (master seed, path),
/// so replays and checkpoint resumption reproduce the exact draw sequence.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    /// splitmix64 finalizer; used both as a mixer and a string hash step.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t combine(std::uint64_t seed, std::uint64_t label) {
        return mix(seed ^ mix(label));
    }

    static std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t s = mix(seed);
        for (std::uint64_t p : path) s = combine(s, p);
        return s;
    }

    static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        return RngStream(derive_seed(seed, path));
    }

    static std::uint64_t hash_label(std::string_view s) {
        // FNV-1a, then finalized; stable across platforms.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return mix(h);
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mdrn
