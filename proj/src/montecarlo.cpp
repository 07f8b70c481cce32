#include "mfqkd/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mfqkd/rng.hpp"

namespace mfqkd
{
namespace
{

RateEstimate ratio(std::uint64_t k, std::uint64_t n)
{
    if (n == 0)
        return {};
    double const p = static_cast<double>(k) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

// Threshold detector pair of one basis. A photon-borne click lands on the
// correct detector unless a detection error (probability e_d) flips it; a
// dark count fires one of the two detectors at random. Both firing gives a
// random bit.
struct Detection
{
    bool click = false;
    bool error = false;
};

Detection detect(StreamRng& rng, std::uint32_t photons, double transfer, ChannelParams const& ch)
{
    std::uint32_t arrived = 0;
    for (std::uint32_t k = 0; k < photons; ++k)
        arrived += rng.bernoulli(transfer) ? 1u : 0u;
    bool const dark = rng.bernoulli(ch.p_dc);

    bool wrong_fires = false;
    bool right_fires = false;
    if (arrived > 0)
        (rng.bernoulli(ch.e_d) ? wrong_fires : right_fires) = true;
    if (dark)
        (rng.bernoulli(0.5) ? wrong_fires : right_fires) = true;

    Detection d;
    d.click = wrong_fires || right_fires;
    if (wrong_fires && right_fires)
        d.error = rng.bernoulli(0.5);
    else
        d.error = wrong_fires;
    return d;
}

TallyCounts run_range(TrialConfig const& cfg, std::uint64_t begin, std::uint64_t end)
{
    TallyCounts t;
    double const transfer = cfg.channel.transmittance() * cfg.channel.eta_det;
    double const pz = cfg.protocol.pA_z;
    for (std::uint64_t i = begin; i < end; ++i)
    {
        StreamRng rng(cfg.seed, i);
        double const u = rng.uniform();
        bool const alice_z = u < pz;
        if (!alice_z)
            ++t.sent_x0;
        else if (u < 0.5 * pz)
            ++t.sent_z0;
        else
            ++t.sent_z1;

        std::uint32_t const photons = rng.poisson(alice_z ? cfg.source.mu : cfg.source.nu);
        bool const bob_z = rng.bernoulli(cfg.protocol.pB_z);
        // Mismatched bases are discarded at sifting whatever the outcome.
        if (alice_z != bob_z)
            continue;
        auto const det = detect(rng, photons, transfer, cfg.channel);
        BasisTally& b = alice_z ? t.z : t.x;
        ++b.matched;
        if (det.click)
        {
            ++b.detected;
            if (det.error)
                ++b.errors;
        }
    }
    return t;
}

}  // namespace

void TrialConfig::validate() const
{
    validate_intensities(SourceIntensities{source});
    channel.validate();
    protocol.validate();
}

TallyCounts& TallyCounts::operator+=(TallyCounts const& o)
{
    sent_z0 += o.sent_z0;
    sent_z1 += o.sent_z1;
    sent_x0 += o.sent_x0;
    z += o.z;
    x += o.x;
    return *this;
}

RateEstimate TallyCounts::q_z() const
{
    return ratio(z.detected, z.matched);
}

RateEstimate TallyCounts::e_z() const
{
    return ratio(z.errors, z.detected);
}

RateEstimate TallyCounts::q_x() const
{
    return ratio(x.detected, x.matched);
}

RateEstimate TallyCounts::e_x() const
{
    return ratio(x.errors, x.detected);
}

TallyCounts run_protocol(TrialConfig const& cfg, unsigned threads)
{
    cfg.validate();
    std::uint64_t const n = cfg.n_pulses;
    unsigned const workers = static_cast<unsigned>(
        std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, n / 4096 + 1)));
    if (workers == 1)
        return run_range(cfg, 0, n);

    std::vector<TallyCounts> partial(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
    {
        std::uint64_t const begin = n * w / workers;
        std::uint64_t const end = n * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] { partial[w] = run_range(cfg, begin, end); });
    }
    for (auto& t : pool)
        t.join();
    TallyCounts total;
    for (auto const& p : partial)
        total += p;
    return total;
}

KeyRatePoint empirical_key_rate(TallyCounts const& tally, TrialConfig const& cfg)
{
    if (tally.z.detected == 0 || tally.x.detected == 0)
        throw InsufficientStatistics("insufficient statistics: no detections in "
                                     + std::string(tally.z.detected == 0 ? "Z" : "X") + " basis");
    GainError const z{tally.q_z().value, tally.e_z().value};
    GainError const x{tally.q_x().value, tally.e_x().value};
    return no_decoy_rate(z, x, cfg.source, cfg.protocol, cfg.channel.distance);
}

}  // namespace mfqkd
