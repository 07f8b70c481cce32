#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "mfqkd/laser.hpp"

namespace mfqkd
{

//! Three-state time-bin alphabet: early pulse, late pulse, pulses in both bins.
enum class StateSymbol
{
    Z0,
    Z1,
    X0
};

std::string_view to_string(StateSymbol s);
//! Throws std::invalid_argument for anything other than "Z0", "Z1", "X0".
StateSymbol parse_symbol(std::string_view text);

//! Symbols drawn with probabilities pz/2, pz/2, 1-pz from a seeded stream.
std::vector<StateSymbol> random_sequence(std::size_t count, std::uint64_t seed, double pz);

/*!
 * Bin geometry of the transmitter.
 *
 * Every state occupies a slot of two bins (early, late) followed by
 * `state_gap`, which must be a whole number of bins so that the regular slave
 * pulse train stays aligned with the slots.
 */
struct EncodingTiming
{
    double bin_period = 800e-12;
    double state_gap = 1600e-12;
    double master_lead = 200e-12;
    double slave_pulse_width = 300e-12;
    double master_short_width = 800e-12;
    double master_long_width = 1600e-12;

    void validate() const;
    double slot_duration() const { return 2.0 * bin_period + state_gap; }
    std::size_t bins_per_slot() const;
    //! Whole bins placed ahead of the first slot so the first master pulse can lead it.
    std::size_t preamble_bins() const;
};

struct DriveLevels
{
    double master_bias = 0.0;
    double master_pulse = 0.0;
    double slave_bias = 0.0;
    double slave_pulse = 0.0;

    void validate() const;
    //! Reference gain-switching levels as multiples of the lasers' threshold currents.
    static DriveLevels reference(double master_ith, double slave_ith);
};

struct DriveSchedule
{
    PumpWaveform master;
    PumpWaveform slave;
    std::size_t preamble_bins = 0;
    std::size_t samples_per_bin = 0;
    //! Start times of the inter-state gaps (candidate phase-randomization points).
    std::vector<double> gap_starts;

    double origin() const
    {
        return static_cast<double>(preamble_bins) * static_cast<double>(samples_per_bin) * master.dt;
    }
};

DriveSchedule build_drive(std::vector<StateSymbol> const& sequence,
                          EncodingTiming const& timing,
                          DriveLevels const& levels,
                          double dt);

//! Complex envelope in sqrt(W) in the slave carrier frame.
struct ComplexFieldTrace
{
    double dt = 0.0;
    std::vector<std::complex<double>> samples;
};

struct PowerTrace
{
    double dt = 0.0;
    std::vector<double> samples;
};

//! E(t) = sqrt(P(t)) * exp(i (phi(t) + 2 pi frame_offset t)).
ComplexFieldTrace assemble_field(FieldTrajectory const& traj, double frame_offset_hz);
PowerTrace power_of(ComplexFieldTrace const& field);

struct FilterSpec
{
    double center_offset = -100e9;  // Hz relative to the slave carrier
    double half_width = 50e9;       // 3-dB half width, Hz
    int order = 2;

    void validate() const;
};

//! |H(f)| = 1 / sqrt(1 + ((f - f0) / fc)^(2n)).
double butterworth_gain(double f, FilterSpec const& spec);

//! Zero-phase Butterworth magnitude response applied on the full-trace DFT.
ComplexFieldTrace butterworth_filter(ComplexFieldTrace const& field, FilterSpec const& spec);

//! DFT bin frequencies (Hz, FFT ordering) for n samples at spacing dt.
std::vector<double> fft_frequencies(std::size_t n, double dt);
//! Unnormalized forward DFT.
std::vector<std::complex<double>> forward_dft(std::vector<std::complex<double>> const& x);

//! Frequency of the strongest DFT component of the field restricted to [t_begin, t_end).
double spectral_peak(ComplexFieldTrace const& field, double t_begin, double t_end);

struct MZISpec
{
    double delay = 800e-12;
    double theta = 0.0;
};

struct InterferenceOutput
{
    PowerTrace constructive;
    PowerTrace destructive;
};

/*!
 * Unbalanced Mach-Zehnder interferometer with ideal 50/50 couplers.
 *
 * Ports: |E(t) +- e^{i theta} E(t - delay)|^2 / 4; the delayed arm is empty
 * before t = delay.
 */
InterferenceOutput mzi_interfere(ComplexFieldTrace const& field, MZISpec const& spec);

/*!
 * Scan theta on a uniform grid over [0, 2 pi) and return the value that
 * maximizes the constructive-port energy summed over the given windows.
 */
double calibrate_theta(ComplexFieldTrace const& field,
                       double delay,
                       std::vector<std::pair<double, double>> const& windows,
                       std::size_t steps = 720);

//! First-order low-pass (photodiode bandwidth emulation).
PowerTrace photodiode_lowpass(PowerTrace const& power, double cutoff_hz);

struct BinMetrics
{
    StateSymbol symbol = StateSymbol::Z0;
    double bin0_energy = 0.0;  // J
    double bin1_energy = 0.0;  // J
    //! Mean photon number after attenuation: designated bin for Z, both bins for X0.
    double mu_hat = 0.0;
    //! Weakest occupied bin over the brightest blocked bin of the slot, dB.
    double extinction_db = 0.0;
    double visibility = 0.0;
};

//! Energy of every whole bin of the trace (bin b spans [b T, (b + 1) T)).
std::vector<double> bin_energies(PowerTrace const& power, double bin_period);

//! Global bin indices that the sequence commands to be lit.
std::vector<bool> designated_bins(std::vector<StateSymbol> const& sequence,
                                  EncodingTiming const& timing,
                                  std::size_t total_bins);

std::vector<BinMetrics> analyze_bins(PowerTrace const& filtered,
                                     InterferenceOutput const& interference,
                                     std::vector<StateSymbol> const& sequence,
                                     EncodingTiming const& timing,
                                     double attenuation_db,
                                     double photon_energy);

//! Attenuation (dB) that maps a pulse of `energy` joules to `target_mu` photons.
double attenuation_for_mu(double energy, double photon_energy, double target_mu);

//! Read each slot back from the filtered bin energies; nullopt when ambiguous.
std::vector<std::optional<StateSymbol>> decode_slots(std::vector<double> const& energies,
                                                     EncodingTiming const& timing,
                                                     std::size_t slots);

}  // namespace mfqkd
