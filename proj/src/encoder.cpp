#include "mfqkd/encoder.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>

#include "mfqkd/rng.hpp"

namespace mfqkd
{
namespace
{

void require(bool ok, std::string const& what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

constexpr double kEnergyFloor = 1e-30;  // J

std::size_t samples_for(double duration, double dt)
{
    return static_cast<std::size_t>(std::llround(duration / dt));
}

// FFTW planning is not thread safe; execution of distinct plans is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

class DftPlan
{
  public:
    DftPlan(std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out, int sign)
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(in.size()),
                                 reinterpret_cast<fftw_complex*>(in.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()),
                                 sign,
                                 FFTW_ESTIMATE);
        if (!plan_)
            throw std::runtime_error("FFTW plan creation failed");
    }
    DftPlan(DftPlan const&) = delete;
    DftPlan& operator=(DftPlan const&) = delete;
    ~DftPlan()
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }

    void execute() { fftw_execute(plan_); }

  private:
    fftw_plan plan_ = nullptr;
};

std::vector<std::complex<double>> dft(std::vector<std::complex<double>> x, int sign)
{
    std::vector<std::complex<double>> out(x.size());
    if (x.empty())
        return out;
    DftPlan plan(x, out, sign);
    plan.execute();
    return out;
}

double window_energy(std::vector<double> const& p, std::size_t begin, std::size_t end, double dt)
{
    double acc = 0.0;
    for (std::size_t i = begin; i < std::min(end, p.size()); ++i)
        acc += p[i];
    return acc * dt;
}

}  // namespace

std::string_view to_string(StateSymbol s)
{
    switch (s)
    {
        case StateSymbol::Z0:
            return "Z0";
        case StateSymbol::Z1:
            return "Z1";
        case StateSymbol::X0:
            return "X0";
    }
    return "?";
}

StateSymbol parse_symbol(std::string_view text)
{
    if (text == "Z0")
        return StateSymbol::Z0;
    if (text == "Z1")
        return StateSymbol::Z1;
    if (text == "X0")
        return StateSymbol::X0;
    throw std::invalid_argument("unknown state symbol '" + std::string(text)
                                + "' (expected Z0, Z1 or X0)");
}

std::vector<StateSymbol> random_sequence(std::size_t count, std::uint64_t seed, double pz)
{
    require(pz >= 0.0 && pz <= 1.0, "Z-basis probability must lie in [0, 1]");
    std::vector<StateSymbol> seq;
    seq.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        StreamRng rng(seed, i);
        double const u = rng.uniform();
        seq.push_back(u < 0.5 * pz ? StateSymbol::Z0 : (u < pz ? StateSymbol::Z1 : StateSymbol::X0));
    }
    return seq;
}

void EncodingTiming::validate() const
{
    require(bin_period > 0.0, "bin_period must be positive");
    require(state_gap >= 0.0, "state_gap must be non-negative");
    require(master_lead >= 0.0, "master_lead must be non-negative");
    require(slave_pulse_width > 0.0 && slave_pulse_width <= bin_period,
            "slave_pulse_width must lie in (0, bin_period]");
    require(std::abs(master_short_width - bin_period) <= 0.25 * bin_period,
            "master_short_width must be within 25% of bin_period");
    require(std::abs(master_long_width - 2.0 * bin_period) <= 0.5 * bin_period,
            "master_long_width must be within 25% of twice bin_period");
    double const gap_bins = state_gap / bin_period;
    require(std::abs(gap_bins - std::round(gap_bins)) < 1e-6,
            "state_gap must be a whole number of bin periods");
}

std::size_t EncodingTiming::bins_per_slot() const
{
    return 2 + static_cast<std::size_t>(std::llround(state_gap / bin_period));
}

std::size_t EncodingTiming::preamble_bins() const
{
    return static_cast<std::size_t>(std::ceil(master_lead / bin_period - 1e-9));
}

void DriveLevels::validate() const
{
    require(master_bias >= 0.0 && slave_bias >= 0.0, "bias currents must be non-negative");
    require(master_pulse > master_bias, "master_pulse must exceed master_bias");
    require(slave_pulse > slave_bias, "slave_pulse must exceed slave_bias");
}

DriveLevels DriveLevels::reference(double master_ith, double slave_ith)
{
    return {0.8 * master_ith, 3.0 * master_ith, 0.9 * slave_ith, 4.0 * slave_ith};
}

DriveSchedule build_drive(std::vector<StateSymbol> const& sequence,
                          EncodingTiming const& timing,
                          DriveLevels const& levels,
                          double dt)
{
    require(dt > 0.0, "drive sample period must be positive");
    timing.validate();
    levels.validate();

    double const per_bin = timing.bin_period / dt;
    require(std::abs(per_bin - std::round(per_bin)) < 1e-6 && std::round(per_bin) >= 2.0,
            "bin_period is not representable on the sample grid");
    for (double q : {timing.slave_pulse_width, timing.master_short_width, timing.master_long_width})
        require(samples_for(q, dt) >= 1, "pulse width shorter than one sample");

    DriveSchedule out;
    out.samples_per_bin = static_cast<std::size_t>(std::llround(per_bin));
    out.master.dt = dt;
    out.slave.dt = dt;
    if (sequence.empty())
        return out;

    std::size_t const n_bin = out.samples_per_bin;
    std::size_t const bps = timing.bins_per_slot();
    out.preamble_bins = timing.preamble_bins();
    std::size_t const total_bins = out.preamble_bins + bps * sequence.size();
    std::size_t const total = total_bins * n_bin;

    out.slave.samples.assign(total, levels.slave_bias);
    std::size_t const slave_w = samples_for(timing.slave_pulse_width, dt);
    for (std::size_t b = 0; b < total_bins; ++b)
        std::fill_n(out.slave.samples.begin() + static_cast<std::ptrdiff_t>(b * n_bin),
                    std::min(slave_w, n_bin),
                    levels.slave_pulse);

    out.master.samples.assign(total, levels.master_bias);
    std::size_t const lead = samples_for(timing.master_lead, dt);
    std::size_t const short_w = samples_for(timing.master_short_width, dt);
    std::size_t const long_w = samples_for(timing.master_long_width, dt);
    for (std::size_t k = 0; k < sequence.size(); ++k)
    {
        std::size_t const slot0 = (out.preamble_bins + k * bps) * n_bin;
        std::size_t start = 0;
        std::size_t width = 0;
        switch (sequence[k])
        {
            case StateSymbol::Z0:
                start = slot0 - lead;
                width = short_w;
                break;
            case StateSymbol::Z1:
                start = slot0 + n_bin - lead;
                width = short_w;
                break;
            case StateSymbol::X0:
                start = slot0 - lead;
                width = long_w;
                break;
        }
        std::size_t const end = std::min(start + width, total);
        std::fill(out.master.samples.begin() + static_cast<std::ptrdiff_t>(start),
                  out.master.samples.begin() + static_cast<std::ptrdiff_t>(end),
                  levels.master_pulse);
        out.gap_starts.push_back(static_cast<double>(slot0 + 2 * n_bin) * dt);
    }
    return out;
}

ComplexFieldTrace assemble_field(FieldTrajectory const& traj, double frame_offset_hz)
{
    ComplexFieldTrace out{traj.dt, {}};
    out.samples.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
    {
        double const amp = std::sqrt(std::max(traj.power_series[i], 0.0));
        double const phase = traj.phi_series[i] + 2.0 * kPi * frame_offset_hz * traj.time(i);
        out.samples.push_back(std::polar(amp, phase));
    }
    return out;
}

PowerTrace power_of(ComplexFieldTrace const& field)
{
    PowerTrace out{field.dt, {}};
    out.samples.reserve(field.samples.size());
    for (auto const& e : field.samples)
        out.samples.push_back(std::norm(e));
    return out;
}

void FilterSpec::validate() const
{
    require(half_width > 0.0, "filter half width must be positive");
    require(order >= 1, "filter order must be at least 1");
}

double butterworth_gain(double f, FilterSpec const& spec)
{
    double const x = (f - spec.center_offset) / spec.half_width;
    return 1.0 / std::sqrt(1.0 + std::pow(x * x, spec.order));
}

std::vector<double> fft_frequencies(std::size_t n, double dt)
{
    std::vector<double> f(n);
    double const df = 1.0 / (static_cast<double>(n) * dt);
    for (std::size_t k = 0; k < n; ++k)
    {
        auto const signed_k = k < (n + 1) / 2 ? static_cast<double>(k)
                                              : static_cast<double>(k) - static_cast<double>(n);
        f[k] = signed_k * df;
    }
    return f;
}

std::vector<std::complex<double>> forward_dft(std::vector<std::complex<double>> const& x)
{
    return dft(x, FFTW_FORWARD);
}

ComplexFieldTrace butterworth_filter(ComplexFieldTrace const& field, FilterSpec const& spec)
{
    spec.validate();
    require(!field.samples.empty(), "cannot filter an empty field");
    auto spectrum = dft(field.samples, FFTW_FORWARD);
    auto const freq = fft_frequencies(spectrum.size(), field.dt);
    double const norm = 1.0 / static_cast<double>(spectrum.size());
    for (std::size_t k = 0; k < spectrum.size(); ++k)
        spectrum[k] *= butterworth_gain(freq[k], spec) * norm;
    return {field.dt, dft(std::move(spectrum), FFTW_BACKWARD)};
}

double spectral_peak(ComplexFieldTrace const& field, double t_begin, double t_end)
{
    auto const first = static_cast<std::size_t>(std::max(0.0, std::round(t_begin / field.dt)));
    auto const last = std::min(field.samples.size(),
                               static_cast<std::size_t>(std::max(0.0, std::round(t_end / field.dt))));
    require(last > first + 1, "spectral window is empty");
    std::vector<std::complex<double>> seg(field.samples.begin() + static_cast<std::ptrdiff_t>(first),
                                          field.samples.begin() + static_cast<std::ptrdiff_t>(last));
    auto const spec = dft(seg, FFTW_FORWARD);
    auto const freq = fft_frequencies(spec.size(), field.dt);
    std::size_t best = 0;
    for (std::size_t k = 1; k < spec.size(); ++k)
        if (std::norm(spec[k]) > std::norm(spec[best]))
            best = k;
    return freq[best];
}

InterferenceOutput mzi_interfere(ComplexFieldTrace const& field, MZISpec const& spec)
{
    require(spec.delay > 0.0, "interferometer delay must be positive");
    require(field.dt > 0.0, "field sample period must be positive");
    double const shift = spec.delay / field.dt;
    require(std::abs(shift - std::round(shift)) < 1e-6, "interferometer delay is not on the sample grid");
    auto const d = static_cast<std::size_t>(std::llround(shift));
    require(d <= field.samples.size(), "interferometer delay longer than the trace");

    std::complex<double> const rot = std::polar(1.0, spec.theta);
    InterferenceOutput out{{field.dt, {}}, {field.dt, {}}};
    out.constructive.samples.resize(field.samples.size());
    out.destructive.samples.resize(field.samples.size());
    for (std::size_t i = 0; i < field.samples.size(); ++i)
    {
        std::complex<double> const delayed = i >= d ? rot * field.samples[i - d] : 0.0;
        out.constructive.samples[i] = 0.25 * std::norm(field.samples[i] + delayed);
        out.destructive.samples[i] = 0.25 * std::norm(field.samples[i] - delayed);
    }
    return out;
}

double calibrate_theta(ComplexFieldTrace const& field,
                       double delay,
                       std::vector<std::pair<double, double>> const& windows,
                       std::size_t steps)
{
    require(steps >= 1, "theta scan needs at least one step");
    auto const d = static_cast<std::size_t>(std::llround(delay / field.dt));
    // Constructive energy is A + Re(e^{-i theta} C) with C = sum E(t) conj(E(t - d)).
    std::complex<double> corr = 0.0;
    for (auto const& [t0, t1] : windows)
    {
        auto const first = static_cast<std::size_t>(std::max(0.0, std::round(t0 / field.dt)));
        auto const last = std::min(field.samples.size(),
                                   static_cast<std::size_t>(std::max(0.0, std::round(t1 / field.dt))));
        for (std::size_t i = std::max(first, d); i < last; ++i)
            corr += field.samples[i] * std::conj(field.samples[i - d]);
    }
    double best_theta = 0.0;
    double best = -1.0e300;
    for (std::size_t k = 0; k < steps; ++k)
    {
        double const theta = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(steps);
        double const score = std::real(std::polar(1.0, -theta) * corr);
        if (score > best)
        {
            best = score;
            best_theta = theta;
        }
    }
    return best_theta;
}

PowerTrace photodiode_lowpass(PowerTrace const& power, double cutoff_hz)
{
    require(cutoff_hz > 0.0, "photodiode cutoff must be positive");
    PowerTrace out{power.dt, {}};
    out.samples.reserve(power.samples.size());
    double const a = 1.0 - std::exp(-2.0 * kPi * cutoff_hz * power.dt);
    double y = power.samples.empty() ? 0.0 : power.samples.front();
    for (double x : power.samples)
    {
        y += a * (x - y);
        out.samples.push_back(y);
    }
    return out;
}

std::vector<double> bin_energies(PowerTrace const& power, double bin_period)
{
    require(power.dt > 0.0, "power trace dt must be positive");
    auto const n_bin = samples_for(bin_period, power.dt);
    require(n_bin >= 1, "bin shorter than one sample");
    std::vector<double> out(power.samples.size() / n_bin);
    for (std::size_t b = 0; b < out.size(); ++b)
        out[b] = window_energy(power.samples, b * n_bin, (b + 1) * n_bin, power.dt);
    return out;
}

std::vector<bool> designated_bins(std::vector<StateSymbol> const& sequence,
                                  EncodingTiming const& timing,
                                  std::size_t total_bins)
{
    std::vector<bool> lit(total_bins, false);
    std::size_t const pre = timing.preamble_bins();
    std::size_t const bps = timing.bins_per_slot();
    auto mark = [&](std::size_t b) {
        if (b < total_bins)
            lit[b] = true;
    };
    for (std::size_t k = 0; k < sequence.size(); ++k)
    {
        std::size_t const b0 = pre + k * bps;
        if (sequence[k] != StateSymbol::Z1)
            mark(b0);
        if (sequence[k] != StateSymbol::Z0)
            mark(b0 + 1);
    }
    return lit;
}

std::vector<BinMetrics> analyze_bins(PowerTrace const& filtered,
                                     InterferenceOutput const& interference,
                                     std::vector<StateSymbol> const& sequence,
                                     EncodingTiming const& timing,
                                     double attenuation_db,
                                     double photon_energy)
{
    require(photon_energy > 0.0, "photon energy must be positive");
    require(interference.constructive.samples.size() == filtered.samples.size()
                && interference.destructive.samples.size() == filtered.samples.size(),
            "interference traces must align with the filtered trace");
    auto const energies = bin_energies(filtered, timing.bin_period);
    auto const lit = designated_bins(sequence, timing, energies.size());
    auto const constructive = bin_energies(interference.constructive, timing.bin_period);
    auto const destructive = bin_energies(interference.destructive, timing.bin_period);

    std::size_t const pre = timing.preamble_bins();
    std::size_t const bps = timing.bins_per_slot();
    require(pre + bps * sequence.size() <= energies.size(), "trace shorter than the slot grid");
    double const photons_per_joule = std::pow(10.0, -attenuation_db / 10.0) / photon_energy;

    std::vector<BinMetrics> out;
    out.reserve(sequence.size());
    for (std::size_t k = 0; k < sequence.size(); ++k)
    {
        std::size_t const b0 = pre + k * bps;
        BinMetrics m;
        m.symbol = sequence[k];
        m.bin0_energy = energies[b0];
        m.bin1_energy = energies[b0 + 1];
        double occupied = 1e300;
        double blocked = 0.0;
        for (std::size_t b = b0; b < b0 + bps; ++b)
        {
            if (lit[b])
                occupied = std::min(occupied, energies[b]);
            else
                blocked = std::max(blocked, energies[b]);
        }
        double signal = 0.0;
        switch (m.symbol)
        {
            case StateSymbol::Z0:
                signal = m.bin0_energy;
                break;
            case StateSymbol::Z1:
                signal = m.bin1_energy;
                break;
            case StateSymbol::X0:
                signal = m.bin0_energy + m.bin1_energy;
                break;
        }
        m.mu_hat = signal * photons_per_joule;
        m.extinction_db = 10.0 * std::log10(std::max(occupied, kEnergyFloor)
                                            / std::max(blocked, kEnergyFloor));
        double const ec = constructive[b0 + 1];
        double const ed = destructive[b0 + 1];
        m.visibility = ec + ed > kEnergyFloor ? std::clamp((ec - ed) / (ec + ed), 0.0, 1.0) : 0.0;
        out.push_back(m);
    }
    return out;
}

double attenuation_for_mu(double energy, double photon_energy, double target_mu)
{
    require(energy > 0.0 && photon_energy > 0.0 && target_mu > 0.0,
            "attenuation needs positive energy, photon energy and target");
    return 10.0 * std::log10(energy / photon_energy / target_mu);
}

std::vector<std::optional<StateSymbol>> decode_slots(std::vector<double> const& energies,
                                                     EncodingTiming const& timing,
                                                     std::size_t slots)
{
    std::size_t const pre = timing.preamble_bins();
    std::size_t const bps = timing.bins_per_slot();
    std::vector<std::optional<StateSymbol>> out;
    for (std::size_t k = 0; k < slots; ++k)
    {
        std::size_t const b0 = pre + k * bps;
        if (b0 + bps > energies.size())
        {
            out.emplace_back();
            continue;
        }
        double const e0 = energies[b0];
        double const e1 = energies[b0 + 1];
        double const hi = std::max(e0, e1);
        double const lo = std::min(e0, e1);
        double gap = 0.0;
        for (std::size_t b = b0 + 2; b < b0 + bps; ++b)
            gap = std::max(gap, energies[b]);
        // 10 dB decision thresholds between lit and dark bins.
        if (hi <= kEnergyFloor || gap * 10.0 > hi)
            out.emplace_back();
        else if (lo * 10.0 >= hi)
            out.emplace_back(gap * 10.0 <= lo ? std::optional(StateSymbol::X0) : std::nullopt);
        else
            out.emplace_back(e0 > e1 ? StateSymbol::Z0 : StateSymbol::Z1);
    }
    return out;
}

}  // namespace mfqkd
