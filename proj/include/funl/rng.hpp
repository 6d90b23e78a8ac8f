#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace funl {

// SplitMix64 finalizer. Also the core step of Rng below.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over a byte string, used to hash seed-derivation tags.
std::uint64_t fnv1a64(std::string_view bytes);

// Deterministic sub-seed derivation: splitmix64(base ^ fnv1a64(tag)).
// One master seed plus a fixed tag vocabulary derives every RNG stream
// in a run, so artifacts are reproducible end to end.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Small deterministic generator. All randomized operations in the project
// go through this class so that identical seeds give identical results on
// every platform; nothing here depends on implementation-defined stdlib
// distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    // Uniform in [a, b).
    double uniform(double a, double b);
    // Uniform integer in [0, n); n > 0.
    std::int64_t below(std::int64_t n);
    // Standard normal via Box-Muller (second value cached).
    double normal();
    // Gamma(alpha, 1) via Marsaglia-Tsang; alpha > 0.
    double gamma(double alpha);
    // Proportions on the simplex from independent gamma draws.
    std::vector<double> dirichlet(const std::vector<double>& alpha);
    // Fisher-Yates permutation of [0, n).
    std::vector<std::int64_t> permutation(std::int64_t n);
    // k distinct values from [0, n), k <= n, returned sorted.
    std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace funl
