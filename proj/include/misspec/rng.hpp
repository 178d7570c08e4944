#pragma once

// Counter-based splittable random number generation.
//
// Every stream is addressed by a 64-bit key; draw i of a stream depends only
// on (key, i). Streams derived from (master_seed, scenario, replication) are
// therefore reproducible regardless of scheduling or draw order.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

#include "misspec/normal.hpp"

namespace misspec {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Two-round SplitMix-style hash of (key, counter).
inline constexpr std::uint64_t counter_hash(std::uint64_t key, std::uint64_t ctr) {
    std::uint64_t z = detail::mix64(key + detail::kGolden * (ctr + 1));
    return detail::mix64(z + detail::kGolden);
}

inline constexpr std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL; // FNV-1a
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Folds parts into a fresh stream key. derive_seed({master, id, rep}).
inline constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6A09E667F3BCC909ULL;
    for (std::uint64_t p : parts) h = counter_hash(h, p);
    return h;
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return counter_hash(key_, ctr_++); }

    // Uniform on (0, 1), both endpoints excluded.
    double uniform() {
        const std::uint64_t bits = next_u64() >> 11; // 53 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inverse-CDF draw; consumes exactly one counter.
    double normal() { return norm_quantile(uniform()); }

    double exponential() { return -std::log(uniform()); } // rate 1

    std::uint64_t counter() const { return ctr_; }
    void skip_to(std::uint64_t ctr) { ctr_ = ctr; }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace misspec
