#include "mfqkd/scenario.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>
#include <string>

namespace mfqkd
{

void ScenarioConfig::validate() const
{
    master.validate();
    slave.validate();
    injection.validate();
    timing.validate();
    levels.validate();
    filter.validate();
    if (dt <= 0.0)
        throw std::invalid_argument("dt must be positive");
    if (output_stride < 1)
        throw std::invalid_argument("output_stride must be at least 1");
    // The stored field must resolve the filter band and the free-running
    // carrier at 0 Hz without aliasing one onto the other.
    double const nyquist = 0.5 / (dt * static_cast<double>(output_stride));
    if (std::abs(filter.center_offset) + 2.0 * filter.half_width >= nyquist)
        throw std::invalid_argument("output_stride too coarse: sampling at " + std::to_string(nyquist * 2e-9)
                                    + " GHz aliases the filter band");
    if (pre_relax < 0.0)
        throw std::invalid_argument("pre_relax must be non-negative");
    if (!(target_mu > 0.0))
        throw std::invalid_argument("target_mu must be positive");
    if (mzi_delay && !(*mzi_delay > 0.0))
        throw std::invalid_argument("mzi delay must be positive");
    if (photodiode_cutoff_hz && !(*photodiode_cutoff_hz > 0.0))
        throw std::invalid_argument("photodiode cutoff must be positive");
}

bool ScenarioResult::decoded_matches(std::vector<StateSymbol> const& sequence) const
{
    if (decoded.size() != sequence.size())
        return false;
    for (std::size_t k = 0; k < sequence.size(); ++k)
        if (!decoded[k] || *decoded[k] != sequence[k])
            return false;
    return true;
}

ScenarioResult run_scenario(ScenarioConfig const& config)
{
    config.validate();
    ScenarioResult out;
    out.drive = build_drive(config.sequence, config.timing, config.levels, config.dt);

    LaserState master_init{config.master.n_tr, 1.0, 0.0};
    LaserState slave_init{config.slave.n_tr, 1.0, 0.0};
    if (config.pre_relax > 0.0)
    {
        master_init = relax_to_bias(config.master, config.levels.master_bias, config.pre_relax, config.dt);
        slave_init = relax_to_bias(config.slave, config.levels.slave_bias, config.pre_relax, config.dt);
    }

    IntegrationOptions opts;
    opts.output_stride = config.output_stride;
    if (config.phase_scramble_seed)
    {
        opts.master_phase_resets = out.drive.gap_starts;
        opts.phase_seed = *config.phase_scramble_seed;
    }
    out.trajectories = integrate(config.master,
                                 config.slave,
                                 config.injection,
                                 out.drive.master,
                                 out.drive.slave,
                                 master_init,
                                 slave_init,
                                 config.dt,
                                 opts);

    auto const& slave = out.trajectories.slave;
    auto const& master = out.trajectories.master;
    out.slave_field = assemble_field(slave, 0.0);
    out.master_power = {master.dt, master.power_series};
    out.slave_power = {slave.dt, slave.power_series};
    if (config.sequence.empty())
        return out;

    out.filtered_field = butterworth_filter(out.slave_field, config.filter);
    out.filtered_power = power_of(out.filtered_field);

    double const delay = config.mzi_delay.value_or(config.timing.bin_period);
    if (config.mzi_theta)
    {
        out.theta = *config.mzi_theta;
    }
    else
    {
        std::vector<std::pair<double, double>> windows;
        double const t_bin = config.timing.bin_period;
        double const origin = out.drive.origin();
        for (std::size_t k = 0; k < config.sequence.size(); ++k)
        {
            if (config.sequence[k] != StateSymbol::X0)
                continue;
            double const start = origin + static_cast<double>(k) * config.timing.slot_duration() + t_bin;
            windows.emplace_back(start, start + t_bin);
        }
        out.theta = windows.empty() ? 0.0 : calibrate_theta(out.filtered_field, delay, windows);
    }
    out.interference = mzi_interfere(out.filtered_field, MZISpec{delay, out.theta});

    if (config.photodiode_cutoff_hz)
    {
        double const fc = *config.photodiode_cutoff_hz;
        out.master_power = photodiode_lowpass(out.master_power, fc);
        out.slave_power = photodiode_lowpass(out.slave_power, fc);
        out.filtered_power = photodiode_lowpass(out.filtered_power, fc);
        out.interference.constructive = photodiode_lowpass(out.interference.constructive, fc);
        out.interference.destructive = photodiode_lowpass(out.interference.destructive, fc);
    }

    out.filtered_bin_energies = bin_energies(out.filtered_power, config.timing.bin_period);
    out.designated = designated_bins(config.sequence, config.timing, out.filtered_bin_energies.size());

    if (config.attenuation_db)
    {
        out.attenuation_db = *config.attenuation_db;
    }
    else
    {
        // Average designated-bin energy of the Z slots (all slots if none are Z).
        auto const raw = analyze_bins(
            out.filtered_power, out.interference, config.sequence, config.timing, 0.0, config.slave.photon_energy);
        double sum = 0.0;
        std::size_t count = 0;
        for (auto const& m : raw)
        {
            if (m.symbol == StateSymbol::X0)
                continue;
            sum += m.mu_hat;
            ++count;
        }
        if (count == 0)
        {
            for (auto const& m : raw)
                sum += 0.5 * m.mu_hat;
            count = raw.size();
        }
        double const photons = sum / static_cast<double>(count);
        out.attenuation_db = photons > 0.0 ? 10.0 * std::log10(photons / config.target_mu) : 0.0;
    }
    out.metrics = analyze_bins(out.filtered_power,
                               out.interference,
                               config.sequence,
                               config.timing,
                               out.attenuation_db,
                               config.slave.photon_energy);
    out.decoded = decode_slots(out.filtered_bin_energies, config.timing, config.sequence.size());
    return out;
}

void write_scenario_csv(std::ostream& os, ScenarioResult const& result)
{
    os << "t_ns,P_master_mW,P_slave_mW,P_filtered_mW,P_constructive_mW,P_destructive_mW\n";
    os << std::setprecision(12);
    auto const n = result.slave_power.samples.size();
    double const dt = result.slave_power.dt;
    auto at = [](PowerTrace const& p, std::size_t i) { return i < p.samples.size() ? p.samples[i] : 0.0; };
    for (std::size_t i = 0; i < n; ++i)
    {
        os << dt * static_cast<double>(i) * 1e9 << ',' << at(result.master_power, i) * 1e3 << ','
           << at(result.slave_power, i) * 1e3 << ',' << at(result.filtered_power, i) * 1e3 << ','
           << at(result.interference.constructive, i) * 1e3 << ','
           << at(result.interference.destructive, i) * 1e3 << '\n';
    }
}

}  // namespace mfqkd
