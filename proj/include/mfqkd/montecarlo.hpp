#pragma once

#include <cstdint>
#include <stdexcept>

#include "mfqkd/security.hpp"

namespace mfqkd
{

struct TrialConfig
{
    std::uint64_t n_pulses = 0;
    std::uint64_t seed = 0;
    NoDecoyIntensities source;
    ChannelParams channel;
    ProtocolConfig protocol;

    void validate() const;
};

struct BasisTally
{
    std::uint64_t matched = 0;   // pulses with a_i = b_i
    std::uint64_t detected = 0;  // matched pulses with a click (sifted events)
    std::uint64_t errors = 0;

    BasisTally& operator+=(BasisTally const& o)
    {
        matched += o.matched;
        detected += o.detected;
        errors += o.errors;
        return *this;
    }
    bool operator==(BasisTally const&) const = default;
};

struct RateEstimate
{
    double value = 0.0;
    double std_error = 0.0;  // binomial standard error
};

struct TallyCounts
{
    std::uint64_t sent_z0 = 0;
    std::uint64_t sent_z1 = 0;
    std::uint64_t sent_x0 = 0;
    BasisTally z;
    BasisTally x;

    TallyCounts& operator+=(TallyCounts const& o);
    std::uint64_t total_sent() const { return sent_z0 + sent_z1 + sent_x0; }

    RateEstimate q_z() const;
    RateEstimate e_z() const;
    RateEstimate q_x() const;
    RateEstimate e_x() const;

    bool operator==(TallyCounts const&) const = default;
};

/*!
 * Bit-level simulation of the three-state protocol on the honest channel.
 *
 * Each pulse draws its own counter-based stream keyed by (seed, pulse index),
 * so the tallies are identical for any number of worker threads.
 */
TallyCounts run_protocol(TrialConfig const& cfg, unsigned threads = 1);

//! Thrown when a basis has no detections to estimate from.
class InsufficientStatistics : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! The no-decoy key rate with the measured gains and error rates substituted.
KeyRatePoint empirical_key_rate(TallyCounts const& tally, TrialConfig const& cfg);

}  // namespace mfqkd
