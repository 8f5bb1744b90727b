#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "blockforge/hash.hpp"

namespace blockforge {

// Counter-based random stream: draw i of a stream is a pure function of
// (key, i). Streams split by key derivation, never by advancing shared
// state, so generation order can never affect content.
class Rng {
public:
    Rng() : key_(0) {}
    explicit Rng(std::uint64_t key) : key_(key) {}

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    // Child stream identified by an integer label.
    Rng split(std::uint64_t label) const {
        return Rng(mix(key_ + 0x9e3779b97f4a7c15ull * (label + 1)) ^ 0x6a09e667f3bcc909ull);
    }
    // Child stream identified by a string label (e.g. "scenegen").
    Rng split(std::string_view label) const {
        return split(fnv1a64(label));
    }

    std::uint64_t next_u64() {
        return mix(key_ + 0x9e3779b97f4a7c15ull * ++ctr_);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1. Lemire reduction, no rejection loop.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    int uniform_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Standard normal; consumes exactly two draws (no cached state).
    double normal() {
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return ctr_; }
    void set_counter(std::uint64_t c) { ctr_ = c; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t ctr_ = 0;
};

}  // namespace blockforge
