#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace coge {

/// Derives an independent per-stage seed from the global experiment seed.
///
/// The rule is `splitmix64(global ^ fnv1a64(stage))`, so one global seed
/// reproduces every stage (generation, training, explanation, ...) while
/// keeping the stage streams decorrelated.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage);

/// Same as above, additionally keyed by an integer (e.g. a graph id).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage, std::uint64_t key);

/// Seeded random source with portable sampling helpers.
///
/// The standard distributions are implementation-defined, so bounded integers,
/// reals and shuffles are derived directly from the mt19937_64 bit stream to
/// keep generated bytes identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). Requires n > 0.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Uniform integer in [lo, hi] (inclusive).
    int uniform_int(int lo, int hi);

    /// Uniform real in [0, 1) with 53 random bits.
    double uniform_real();

    /// Uniform real in [lo, hi).
    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace coge
