#pragma once

#include <cstdint>
#include <random>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace powerprior {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream) pairs; chains, a0 evaluations and
// replicates each get their own.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(substream),
                      static_cast<std::uint32_t>(substream >> 32)};
    return Rng(seq);
}

// Boost distributions are used instead of <random> ones so that draws are
// identical across standard library implementations.
inline double std_normal(Rng& rng)
{
    return boost::random::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng)
{
    return boost::random::uniform_01<double>()(rng);
}

// Gamma with shape/rate.
inline double gamma_rate(Rng& rng, double shape, double rate)
{
    return boost::random::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double beta_draw(Rng& rng, double a, double b)
{
    const double x = gamma_rate(rng, a, 1.0);
    const double y = gamma_rate(rng, b, 1.0);
    return x / (x + y);
}

} // namespace powerprior
