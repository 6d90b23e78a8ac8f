#include "funl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "funl/errors.hpp"

namespace funl {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return splitmix64(base ^ fnv1a64(tag));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ (0x5851f42d4c957f2dull * (index + 1)));
}

std::uint64_t Rng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) {
    return a + (b - a) * uniform();
}

std::int64_t Rng::below(std::int64_t n) {
    if (n <= 0) {
        throw ValueError("Rng::below requires n > 0");
    }
    return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::gamma(double alpha) {
    if (alpha <= 0.0) {
        throw ValueError("Rng::gamma requires alpha > 0");
    }
    if (alpha < 1.0) {
        // Boost: Gamma(a) = Gamma(a+1) * U^(1/a)
        const double g = gamma(alpha + 1.0);
        double u = uniform();
        while (u <= 0.0) {
            u = uniform();
        }
        return g * std::pow(u, 1.0 / alpha);
    }
    // Marsaglia-Tsang squeeze method.
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) {
            continue;
        }
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v;
        }
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

std::vector<double> Rng::dirichlet(const std::vector<double>& alpha) {
    std::vector<double> draws(alpha.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        draws[i] = gamma(alpha[i]);
        total += draws[i];
    }
    if (total <= 0.0) {
        // Extremely peaked concentrations can underflow every draw; fall back
        // to a single winning coordinate.
        std::fill(draws.begin(), draws.end(), 0.0);
        draws[static_cast<std::size_t>(below(static_cast<std::int64_t>(alpha.size())))] = 1.0;
        return draws;
    }
    for (double& d : draws) {
        d /= total;
    }
    return draws;
}

std::vector<std::int64_t> Rng::permutation(std::int64_t n) {
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        perm[static_cast<std::size_t>(i)] = i;
    }
    for (std::int64_t i = n - 1; i > 0; --i) {
        const std::int64_t j = below(i + 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

std::vector<std::int64_t> Rng::sample_without_replacement(std::int64_t n, std::int64_t k) {
    if (k > n) {
        throw ValueError("sample_without_replacement: k > n");
    }
    // Partial Fisher-Yates over an index pool.
    std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        pool[static_cast<std::size_t>(i)] = i;
    }
    for (std::int64_t i = 0; i < k; ++i) {
        const std::int64_t j = i + below(n - i);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::vector<std::int64_t> out(pool.begin(), pool.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace funl
