#pragma once

#include <boost/random/beta_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cmath>
#include <cstdint>
#include <random>

namespace nbpss {

/** Random source used by every sampler in the library.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard; variates come from Boost.Random, whose algorithms do not vary
 * between standard library implementations. Together this makes a fixed
 * (seed, stream) pair bit-reproducible across platforms.
 *
 * Streams: chain `i` of a run seeded with `s` uses stream `i`. The engine is
 * seeded through std::seed_seq over the four 32-bit words of (s, i), so
 * different streams are decorrelated without any skip-ahead.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) { reseed(seed, stream); }

    void reseed(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
        normal_.reset();
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        double u;
        do {
            u = boost::random::uniform_01<double>{}(engine_);
        } while (u <= 0.0);
        return u;
    }

    double normal() { return normal_(engine_); }

    /// Gamma with the given shape and *rate*.
    double gamma(double shape, double rate) {
        return boost::random::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
    }

    /// Inverse gamma IG(shape, scale): 1/X with X ~ Ga(shape, rate = scale).
    double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

    double beta(double a, double b) { return boost::random::beta_distribution<double>(a, b)(engine_); }

    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

} // namespace nbpss
