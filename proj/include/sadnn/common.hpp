#pragma once

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sadnn {

// Error taxonomy. CLI maps ShapeError/ConfigError/IoError to exit code 1,
// NumericError to exit code 2.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Canonical NCHW activation geometry.
struct Shape4 {
    std::size_t n = 1, c = 1, h = 1, w = 1;

    std::size_t numel() const { return n * c * h * w; }
    bool operator==(const Shape4&) const = default;
};

// Counts scalar multiply/add pairs at MAC granularity (accumulators start at
// zero, so every multiply pairs with one accumulation add). Attention layers
// count only the query-key logits and the softmax-value aggregation stages;
// projection GEMMs are excluded, matching the 2*b^2*c counting convention.
struct OpCounter {
    std::uint64_t mul = 0;
    std::uint64_t add = 0;
};

// Deterministic RNG with hand-rolled distributions so generated datasets and
// initializations are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t uniform_index(std::size_t n) {
        return std::size_t(uniform() * double(n)) % n;
    }

    double normal() {
        // Box-Muller, one draw per call
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace sadnn
