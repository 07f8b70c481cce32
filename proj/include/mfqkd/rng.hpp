#pragma once

#include <cmath>
#include <cstdint>

namespace mfqkd
{

//! SplitMix64 output finalizer (a bijective 64-bit mixer).
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/*!
 * Counter-based random stream.
 *
 * A stream is fully determined by (seed, stream index). Every pulse of a Monte
 * Carlo run owns one stream, so the draws of pulse i never depend on how the
 * pulse range is split between workers.
 */
class StreamRng
{
  public:
    StreamRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(mix64(seed ^ 0x6a09e667f3bcc909ull) + stream * 0x9e3779b97f4a7c15ull))
    {
    }

    std::uint64_t next() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

    //! Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    //! Poisson variate by sequential inversion; intended for small means.
    std::uint32_t poisson(double mean);

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

inline std::uint32_t StreamRng::poisson(double mean)
{
    if (mean <= 0.0)
        return 0;
    double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint32_t k = 0;
    // Tail cut at 1000 photons; unreachable for the intensities used here.
    while (u >= cdf && k < 1000)
    {
        ++k;
        p *= mean / k;
        cdf += p;
        if (p == 0.0)
            break;
    }
    return k;
}

}  // namespace mfqkd
