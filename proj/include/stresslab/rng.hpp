#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace stresslab {

/// SplitMix64 finaliser. Bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes of a string; used to turn stream labels into keys.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based generator: the i-th output is mix64(key + i * gamma).
///
/// Streams are split by deriving a new key from the parent key and a label,
/// so every stochastic operation can own an independent, reproducible stream
/// regardless of the order in which work is scheduled. All sampling helpers
/// are implemented here rather than via <random> distributions so outputs are
/// identical across standard library implementations.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        counter_ += kGamma;
        return mix64(key_ + counter_);
    }

    /// Child stream keyed by this stream's key and a label. Does not advance this stream.
    Rng split(std::uint64_t label) const noexcept {
        Rng child(0);
        child.key_ = mix64(key_ ^ mix64(label + kGamma));
        return child;
    }
    Rng split(std::string_view label) const noexcept { return split(hash_label(label)); }
    Rng split(std::initializer_list<std::uint64_t> labels) const noexcept {
        Rng r = *this;
        for (auto l : labels) r = r.split(l);
        return r;
    }

    /// The seed a fresh Rng would need to reproduce this stream's key; recorded in manifests.
    std::uint64_t key() const noexcept { return key_; }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept {
        // Rejection on the biased tail keeps the result exactly uniform.
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t r;
        do {
            r = (*this)();
        } while (r >= limit);
        return r % bound;
    }

    bool coin() noexcept { return ((*this)() >> 63) != 0; }

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }
    template <typename T>
    void shuffle(std::vector<T>& items) noexcept {
        shuffle(std::span<T>(items));
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace stresslab
