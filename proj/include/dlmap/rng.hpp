#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace dlmap {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named sub-stream of a master seed: (stage tag, replicate index) -> seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master ^ h) + index);
}

// mt19937_64 plus hand-written variate transforms. The standard library
// distributions are implementation-defined, so they are avoided wherever a
// result has to be reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), unbiased by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1)
            return 0;
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
        for (;;) {
            std::uint64_t x = engine_();
            if (x < limit)
                return x % n;
        }
    }

    // Uniform integer in [lo, hi].
    long long between(long long lo, long long hi) {
        return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Marsaglia-Tsang gamma(shape, 1).
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = 0.0;
            do {
                u = uniform();
            } while (u <= 0.0);
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0)
                continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x)
                return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v;
        }
    }

    // Knuth multiplication for small means; large means are reduced first by
    // the gamma/binomial splitting of Ahrens and Dieter.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0)
            return 0;
        std::uint64_t acc = 0;
        while (mean > 30.0) {
            // Split off a gamma-distributed arrival time.
            const double m = std::floor(mean * 0.875);
            double x = gamma(m);
            if (x > mean)
                return acc + binomial(static_cast<std::uint64_t>(m) - 1, mean / x);
            acc += static_cast<std::uint64_t>(m);
            mean -= x;
        }
        double l = std::exp(-mean);
        double p = 1.0;
        std::uint64_t k = 0;
        for (;;) {
            p *= uniform();
            if (p <= l)
                return acc + k;
            ++k;
        }
    }

    std::uint64_t binomial(std::uint64_t n, double p) {
        std::uint64_t k = 0;
        for (std::uint64_t i = 0; i < n; ++i)
            if (uniform() < p)
                ++k;
        return k;
    }

    // Gamma-Poisson mixture: mean mu, variance mu + alpha * mu^2.
    std::uint64_t negative_binomial(double mu, double alpha) {
        double size = 1.0 / alpha;
        double lambda = gamma(size) * mu / size;
        return poisson(lambda);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace dlmap
