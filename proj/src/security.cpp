#include "mfqkd/security.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace mfqkd
{
namespace
{

void require(bool ok, std::string const& what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

bool in_unit(double x)
{
    return x >= 0.0 && x <= 1.0;
}

// P(n >= 2) for a Poisson source of mean gamma, without cancellation.
double multi_photon_probability(double gamma)
{
    return -std::expm1(-gamma) - gamma * std::exp(-gamma);
}

constexpr std::size_t kDeltaGrid = 10000;

struct FeasibleObjective
{
    double omega;
    double theta;

    std::optional<double> operator()(double delta) const
    {
        auto eps = fl_epsilon(omega, theta, delta);
        if (!eps)
            return std::nullopt;
        return *eps * *eps + delta * delta;
    }
};

// Boundary between a feasible point `in` and an infeasible point `out`.
double refine_boundary(FeasibleObjective const& f, double in, double out)
{
    for (int i = 0; i < 60; ++i)
    {
        double const mid = 0.5 * (in + out);
        if (f(mid))
            in = mid;
        else
            out = mid;
    }
    return in;
}

// Golden-section maximization on [a, b]; infeasible points score -inf.
std::pair<double, double> golden_max(FeasibleObjective const& f, double a, double b)
{
    constexpr double invphi = 0.6180339887498949;
    auto score = [&](double x) { return f(x).value_or(-1e300); };
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = score(c);
    double fd = score(d);
    for (int i = 0; i < 80 && b - a > 1e-14; ++i)
    {
        if (fc >= fd)
        {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = score(c);
        }
        else
        {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = score(d);
        }
    }
    return fc >= fd ? std::pair{c, fc} : std::pair{d, fd};
}

KeyRatePoint finish(KeyRatePoint p, double leak, ProtocolConfig const& cfg)
{
    if (p.bounds.determinate)
    {
        double const ez = p.bounds.e_up_z;
        double const ex = p.bounds.e_up_x;
        if (ez <= 0.5 && ex <= 0.5)
        {
            auto const fl = fl_reduction(ez, ex);
            p.r_reduction = fl.r;
            p.kappa = fl.kappa;
        }
        else
        {
            p.r_reduction = 0.0;
            p.kappa = 0.5;
        }
        p.rate_per_pulse = p.bounds.q_low * p.r_reduction - leak;
    }
    if (!p.bounds.determinate || !(p.rate_per_pulse > 0.0))
    {
        p.rate_per_pulse = 0.0;
        p.status = KeyStatus::insecure;
    }
    p.bits_per_second_raw = p.rate_per_pulse * cfg.f_prep;
    p.bits_per_second = p.bits_per_second_raw * (cfg.pA_z * cfg.pB_z);
    return p;
}

}  // namespace

void ChannelParams::validate() const
{
    require(in_unit(p_dc), "p_dc must lie in [0, 1]");
    require(in_unit(eta_det), "eta_det must lie in [0, 1]");
    require(in_unit(e_d), "e_d must lie in [0, 1]");
    require(xi >= 0.0, "xi must be non-negative");
    require(distance >= 0.0, "distance must be non-negative");
}

double ChannelParams::transmittance() const
{
    return std::pow(10.0, -xi * distance / 10.0);
}

void validate_intensities(SourceIntensities const& source)
{
    if (auto const* nd = std::get_if<NoDecoyIntensities>(&source))
    {
        require(nd->mu >= 0.0 && nd->nu >= 0.0, "intensities mu, nu must be non-negative");
        return;
    }
    auto const& d = std::get<DecoyIntensities>(source);
    for (double v : {d.mu0, d.mu1, d.mu2, d.nu0, d.nu1, d.nu2})
        require(v >= 0.0, "decoy intensities must be non-negative");
    require(d.mu2 < d.mu1, "decoy intensities must satisfy 0 <= mu2 < mu1");
    require(d.mu1 + d.mu2 < d.mu0, "decoy intensities must satisfy mu1 + mu2 < mu0 (μ_1+μ_2 < μ_0)");
    require(d.nu2 < d.nu1, "decoy intensities must satisfy 0 <= nu2 < nu1");
    require(d.nu1 + d.nu2 < d.nu0, "decoy intensities must satisfy nu1 + nu2 < nu0 (ν_1+ν_2 < ν_0)");
}

void ProtocolConfig::validate() const
{
    require(in_unit(pA_z) && in_unit(pA_x) && std::abs(pA_z + pA_x - 1.0) < 1e-12,
            "pA_z + pA_x must equal 1");
    require(in_unit(pB_z) && in_unit(pB_x) && std::abs(pB_z + pB_x - 1.0) < 1e-12,
            "pB_z + pB_x must equal 1");
    require(f_ec >= 1.0, "f_ec must be at least 1");
    require(f_prep > 0.0, "f_prep must be positive");
}

std::pair<double, double> ProtocolConfig::sifted_probabilities() const
{
    double const zz = pA_z * pB_z;
    double const xx = pA_x * pB_x;
    return {zz / (zz + xx), xx / (zz + xx)};
}

std::string_view to_string(KeyStatus s)
{
    return s == KeyStatus::ok ? "ok" : "insecure/indeterminate";
}

double binary_entropy(double p)
{
    require(in_unit(p), "binary_entropy argument must lie in [0, 1]");
    if (p == 0.0 || p == 1.0)
        return 0.0;
    return -(p * std::log2(p) + (1.0 - p) * std::log1p(-p) / std::log(2.0));
}

GainError channel_model(double gamma, ChannelParams const& ch)
{
    require(gamma >= 0.0, "intensity must be non-negative");
    double const x = ch.transmittance() * ch.eta_det * gamma;
    double const clicks = -std::expm1(-x);  // 1 - e^{-x}
    double const q = ch.p_dc + (1.0 - ch.p_dc) * clicks;
    double const e = q > 0.0 ? (0.5 * ch.p_dc + ch.e_d * clicks) / q : 0.0;
    return {q, e};
}

DecoyEstimate decoy_bounds(std::array<GainError, 3> const& gains, std::array<double, 3> const& intensities)
{
    auto const [i0, i1, i2] = intensities;
    require(i2 >= 0.0 && i2 < i1, "decoy intensities must satisfy 0 <= mu2 < mu1");
    require(i1 + i2 < i0, "decoy intensities must satisfy mu1 + mu2 < mu0 (μ_1+μ_2 < μ_0)");

    double const qe0 = gains[0].q * std::exp(i0);
    double const qe1 = gains[1].q * std::exp(i1);
    double const qe2 = gains[2].q * std::exp(i2);

    DecoyEstimate out;
    out.y0_low = std::max((i1 * qe2 - i2 * qe1) / (i1 - i2), 0.0);
    double const y1 = i0 / (i0 * i1 - i0 * i2 - i1 * i1 + i2 * i2)
                      * (qe1 - qe2 - (i1 * i1 - i2 * i2) / (i0 * i0) * (qe0 - out.y0_low));
    out.y1_low = std::max(y1, 0.0);
    out.q1_low = i0 * std::exp(-i0) * out.y1_low;
    if (out.y1_low > 0.0)
    {
        double const e1 = (gains[1].e * qe1 - gains[2].e * qe2) / ((i1 - i2) * out.y1_low);
        out.e1_up = std::clamp(e1, 0.0, 1.0);
    }
    return out;
}

std::optional<double> fl_epsilon(double omega, double theta, double delta)
{
    // The bracket is multiplied through by theta^2 so that theta -> 0 stays finite.
    double const omega_t = (1.0 - omega) / omega;
    double const s = std::sqrt(std::max(theta * (1.0 - theta) * (1.0 - delta * delta), 0.0));
    double const radicand = theta * omega_t - theta * theta - delta * delta * theta * (1.0 - 2.0 * theta)
                            - 2.0 * delta * theta * s;
    if (radicand < 0.0)
        return std::nullopt;
    return (1.0 - theta) * delta + s + std::sqrt(radicand);
}

FLReduction fl_reduction(double omega, double theta)
{
    require(omega >= 0.0 && omega <= 0.5, "omega must lie in [0, 0.5]");
    require(theta >= 0.0 && theta <= 0.5, "theta must lie in [0, 0.5]");

    FLReduction out;
    if (omega == 0.0)
    {
        // omega * eps^2 -> theta as omega -> 0; every other term vanishes.
        out.kappa = std::min(theta, 0.5);
        out.r = std::max(1.0 - binary_entropy(out.kappa), 0.0);
        return out;
    }

    FeasibleObjective const f{omega, theta};
    std::vector<std::optional<double>> grid(kDeltaGrid + 1);
    for (std::size_t j = 0; j <= kDeltaGrid; ++j)
        grid[j] = f(static_cast<double>(j) / kDeltaGrid);

    double best = -1.0;
    double best_delta = 0.0;
    auto consider = [&](double delta) {
        if (auto v = f(delta); v && *v > best)
        {
            best = *v;
            best_delta = delta;
        }
    };

    std::size_t j = 0;
    while (j <= kDeltaGrid)
    {
        if (!grid[j])
        {
            ++j;
            continue;
        }
        std::size_t const first = j;
        while (j + 1 <= kDeltaGrid && grid[j + 1])
            ++j;
        std::size_t const last = j;
        ++j;

        double lo = static_cast<double>(first) / kDeltaGrid;
        double hi = static_cast<double>(last) / kDeltaGrid;
        if (first > 0)
            lo = refine_boundary(f, lo, static_cast<double>(first - 1) / kDeltaGrid);
        if (last < kDeltaGrid)
            hi = refine_boundary(f, hi, static_cast<double>(last + 1) / kDeltaGrid);
        consider(lo);
        consider(hi);

        std::size_t arg = first;
        for (std::size_t k = first; k <= last; ++k)
            if (*grid[k] > *grid[arg])
                arg = k;
        double const a = std::max(lo, (static_cast<double>(arg) - 1.0) / kDeltaGrid);
        double const b = std::min(hi, (static_cast<double>(arg) + 1.0) / kDeltaGrid);
        consider(static_cast<double>(arg) / kDeltaGrid);
        if (b > a)
            consider(golden_max(f, a, b).first);
    }

    if (best < 0.0)
    {
        out.kappa = 0.5;
        out.r = 0.0;
        return out;
    }
    out.delta = best_delta;
    out.eps_aux = *fl_epsilon(omega, theta, best_delta);
    out.kappa = std::min(omega * best, 0.5);
    out.r = std::max(1.0 - binary_entropy(out.kappa), 0.0);
    return out;
}

SecrecyBounds no_decoy_bounds(GainError const& z, GainError const& x, double mu, double nu)
{
    require(mu >= 0.0 && nu >= 0.0, "intensities must be non-negative");
    SecrecyBounds b;
    double const qz = z.q - multi_photon_probability(mu);
    double const qx = x.q - multi_photon_probability(nu);
    b.q_low = std::max(qz, 0.0);
    if (qz <= 0.0 || qx <= 0.0)
    {
        b.determinate = false;
        b.e_up_z = 1.0;
        b.e_up_x = 1.0;
        return b;
    }
    b.e_up_z = std::clamp(z.e * z.q / qz, 0.0, 1.0);
    b.e_up_x = std::clamp(x.e * x.q / qx, 0.0, 1.0);
    return b;
}

KeyRatePoint no_decoy_rate(GainError const& z,
                           GainError const& x,
                           NoDecoyIntensities const& source,
                           ProtocolConfig const& cfg,
                           double distance)
{
    KeyRatePoint p;
    p.distance = distance;
    p.decoy = false;
    p.signal_z = z;
    p.signal_x = x;
    p.gains_z = {z};
    p.gains_x = {x};
    p.bounds = no_decoy_bounds(z, x, source.mu, source.nu);
    double const leak = cfg.f_ec * z.q * binary_entropy(std::clamp(z.e, 0.0, 1.0));
    return finish(p, leak, cfg);
}

KeyRatePoint secret_key_rate(SourceIntensities const& source, ChannelParams const& ch, ProtocolConfig const& cfg)
{
    ch.validate();
    cfg.validate();
    validate_intensities(source);

    if (auto const* nd = std::get_if<NoDecoyIntensities>(&source))
        return no_decoy_rate(channel_model(nd->mu, ch), channel_model(nd->nu, ch), *nd, cfg, ch.distance);

    auto const& d = std::get<DecoyIntensities>(source);
    KeyRatePoint p;
    p.distance = ch.distance;
    p.decoy = true;
    std::array<double, 3> const iz{d.mu0, d.mu1, d.mu2};
    std::array<double, 3> const ix{d.nu0, d.nu1, d.nu2};
    std::array<GainError, 3> gz{};
    std::array<GainError, 3> gx{};
    for (std::size_t k = 0; k < 3; ++k)
    {
        gz[k] = channel_model(iz[k], ch);
        gx[k] = channel_model(ix[k], ch);
    }
    p.gains_z.assign(gz.begin(), gz.end());
    p.gains_x.assign(gx.begin(), gx.end());
    p.signal_z = gz[0];
    p.signal_x = gx[0];

    auto const bz = decoy_bounds(gz, iz);
    auto const bx = decoy_bounds(gx, ix);
    p.bounds.q_low = bz.q1_low;
    p.bounds.y0_low = bz.y0_low;
    p.bounds.determinate = bz.e1_up.has_value() && bx.e1_up.has_value();
    p.bounds.e_up_z = bz.e1_up.value_or(1.0);
    p.bounds.e_up_x = bx.e1_up.value_or(1.0);
    double const leak = cfg.f_ec * gz[0].q * binary_entropy(std::clamp(gz[0].e, 0.0, 1.0));
    return finish(p, leak, cfg);
}

DistanceScan scan_distance(SourceIntensities const& source,
                           ChannelParams const& ch_template,
                           ProtocolConfig const& cfg,
                           double l_min,
                           double l_max,
                           double step,
                           unsigned threads)
{
    require(l_min <= l_max, "scan range must satisfy from <= to");
    require(step > 0.0, "scan step must be positive");
    require(l_min >= 0.0, "scan distances must be non-negative");

    auto const count = static_cast<std::size_t>(std::floor((l_max - l_min) / step + 1e-9)) + 1;
    auto at = [&](double distance) {
        ChannelParams ch = ch_template;
        ch.distance = distance;
        return secret_key_rate(source, ch, cfg);
    };

    DistanceScan out;
    out.points.resize(count);
    unsigned const workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    auto work = [&](unsigned w) {
        for (std::size_t i = w; i < count; i += workers)
            out.points[i] = at(l_min + static_cast<double>(i) * step);
    };
    if (workers == 1)
    {
        work(0);
    }
    else
    {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(work, w);
        for (auto& t : pool)
            t.join();
    }

    std::optional<std::size_t> last_secure;
    for (std::size_t i = 0; i < count; ++i)
        if (out.points[i].rate_per_pulse > 0.0)
            last_secure = i;
    if (!last_secure)
        return out;

    double lo = out.points[*last_secure].distance;
    if (*last_secure + 1 < count)
    {
        double hi = out.points[*last_secure + 1].distance;
        while (hi - lo > 0.1)
        {
            double const mid = 0.5 * (lo + hi);
            if (at(mid).rate_per_pulse > 0.0)
                lo = mid;
            else
                hi = mid;
        }
    }
    out.max_distance = lo;
    return out;
}

}  // namespace mfqkd
