#include "coge/rng.hpp"

#include <limits>
#include <stdexcept>

namespace coge {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (const char c : text) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
    return splitmix64(global_seed ^ fnv1a64(stage));
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage, std::uint64_t key) {
    return splitmix64(derive_seed(global_seed, stage) ^ splitmix64(key));
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("uniform_index: empty range");
    }
    // Rejection sampling on the largest multiple of n below 2^64.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

int Rng::uniform_int(int lo, int hi) {
    if (hi < lo) {
        throw std::invalid_argument("uniform_int: empty range");
    }
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
    return lo + static_cast<int>(uniform_index(span));
}

double Rng::uniform_real() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

}  // namespace coge
