#pragma once

#include <optional>
#include <vector>

#include "mfqkd/encoder.hpp"
#include "mfqkd/laser.hpp"

namespace mfqkd
{

//! Everything needed to simulate the transmitter on one symbol sequence.
struct ScenarioConfig
{
    LaserParams master = LaserParams::reference_master();
    LaserParams slave = LaserParams::reference_slave();
    InjectionParams injection;
    EncodingTiming timing;
    DriveLevels levels = DriveLevels::reference(master.threshold_current(),
                                                slave.threshold_current());
    FilterSpec filter;
    //! Interferometer delay; defaults to one bin when unset.
    std::optional<double> mzi_delay;
    //! Fixed interferometer phase; calibrated on the X0 slots when unset.
    std::optional<double> mzi_theta;
    //! Fixed attenuation; otherwise chosen so Z slots carry `target_mu` on average.
    std::optional<double> attenuation_db;
    double target_mu = 0.024;
    std::vector<StateSymbol> sequence{StateSymbol::Z0, StateSymbol::X0, StateSymbol::Z1,
                                      StateSymbol::X0, StateSymbol::Z0};
    double dt = 0.1e-12;
    std::size_t output_stride = 1;
    double pre_relax = 5e-9;
    //! Optional master phase scrambling at every inter-state gap.
    std::optional<std::uint64_t> phase_scramble_seed;
    //! Optional photodiode bandwidth applied to the reported power traces.
    std::optional<double> photodiode_cutoff_hz;

    void validate() const;
};

struct ScenarioResult
{
    DriveSchedule drive;
    TrajectoryPair trajectories;
    ComplexFieldTrace slave_field;
    ComplexFieldTrace filtered_field;
    PowerTrace master_power;
    PowerTrace slave_power;
    PowerTrace filtered_power;
    InterferenceOutput interference;
    double theta = 0.0;
    double attenuation_db = 0.0;
    std::vector<double> filtered_bin_energies;
    std::vector<bool> designated;
    std::vector<BinMetrics> metrics;
    std::vector<std::optional<StateSymbol>> decoded;

    //! True when every slot decodes to the commanded symbol.
    bool decoded_matches(std::vector<StateSymbol> const& sequence) const;
};

/*!
 * Drive synthesis, master/slave integration, WDM filtering, interferometric
 * decoding and per-bin analysis for one sequence.
 *
 * Both lasers start from their bias steady state (pre-relaxed without
 * injection for `pre_relax` seconds).
 */
ScenarioResult run_scenario(ScenarioConfig const& config);

//! CSV header t_ns,P_master_mW,P_slave_mW,P_filtered_mW,P_constructive_mW,P_destructive_mW.
void write_scenario_csv(std::ostream& os, ScenarioResult const& result);

}  // namespace mfqkd
