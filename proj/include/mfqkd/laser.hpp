#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace mfqkd
{

inline constexpr double kElectronCharge = 1.602176634e-19;  // C
inline constexpr double kPi = 3.14159265358979323846;

//! Single-mode semiconductor laser rate-equation parameters (SI units).
struct LaserParams
{
    double tau_ph = 1.0e-12;                   // photon lifetime, s
    double tau_e = 1.0e-9;                     // electron lifetime, s
    double eta = 0.3;                          // quantum differential output
    double n_th = 5.5e7;                       // threshold carrier number
    double n_tr = 4.0e7;                       // transparency carrier number
    double photon_energy = 0.8 * kElectronCharge;  // J
    double c_sp = 1.0e-5;                      // spontaneous emission coupling
    double gamma_conf = 0.12;                  // confinement factor
    double alpha = 5.0;                        // linewidth enhancement factor
    double gamma_p = 20.0;                     // gain compression, 1/W

    //! Throws std::invalid_argument naming the first violated constraint.
    void validate() const;

    //! I_th = e * n_th / tau_e.
    double threshold_current() const { return kElectronCharge * n_th / tau_e; }

    //! Measured (single facet) optical power per intracavity photon, W.
    double power_per_photon() const
    {
        return eta * photon_energy / (2.0 * gamma_conf * tau_ph);
    }

    static LaserParams reference_master();
    static LaserParams reference_slave();
};

struct InjectionParams
{
    double kappa_inj = 2.0e11;                    // coupling factor, 1/s
    double delta_omega = -2.0 * kPi * 100.0e9;  // master minus slave, rad/s

    void validate() const;
};

//! Piecewise-constant pump current; sample k holds on [k*dt, (k+1)*dt).
struct PumpWaveform
{
    double dt = 0.0;
    std::vector<double> samples;

    double duration() const { return dt * static_cast<double>(samples.size()); }
    void validate() const;
};

struct LaserState
{
    double n = 0.0;
    double q = 0.0;
    double phi = 0.0;
};

struct FieldTrajectory
{
    double dt = 0.0;
    std::vector<double> n_series;
    std::vector<double> q_series;
    std::vector<double> phi_series;
    std::vector<double> power_series;  // W

    std::size_t size() const { return n_series.size(); }
    double time(std::size_t i) const { return dt * static_cast<double>(i); }
};

struct TrajectoryPair
{
    FieldTrajectory master;
    FieldTrajectory slave;
};

//! Raised when the integration leaves the physical domain or blows up.
class IntegrationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct IntegrationOptions
{
    //! Floor applied to the slave photon number inside sqrt(Q_M / Q).
    double q_floor = 1.0e-6;
    //! Negative excursions smaller than this (in photons / carriers) are clamped to zero.
    double negative_tolerance = 1.0e-3;
    //! Keep every k-th integration step in the returned trajectories.
    std::size_t output_stride = 1;
    //! Times at which the master phase is replaced by a fresh uniform draw.
    std::vector<double> master_phase_resets;
    std::uint64_t phase_seed = 0;
};

double linear_gain(double n, LaserParams const& params);
double saturated_gain(double n, double p, LaserParams const& params);

/*!
 * Integrate the unidirectionally coupled master/slave system with fixed-step RK4.
 *
 * The master obeys the free-running rate equations; the slave additionally
 * sees the injected field through the coherent coupling terms. Intensity
 * equations use the compressed gain, phase equations the linear gain.
 * Trajectory sample i is the state at t = i * dt, for i < duration / dt.
 */
TrajectoryPair integrate(LaserParams const& master,
                         LaserParams const& slave,
                         InjectionParams const& inj,
                         PumpWaveform const& master_drive,
                         PumpWaveform const& slave_drive,
                         LaserState const& master_init,
                         LaserState const& slave_init,
                         double dt,
                         IntegrationOptions const& options = {});

//! Free-running integration of a single laser (the master equations alone).
FieldTrajectory integrate_free(LaserParams const& params,
                               PumpWaveform const& drive,
                               LaserState const& init,
                               double dt,
                               IntegrationOptions const& options = {});

//! State after running `duration` seconds at constant `current` from N = n_tr.
LaserState relax_to_bias(LaserParams const& params, double current, double duration, double dt);

/*!
 * Mean |d/dt (delta_omega * t + phi_M - phi_S)| over [t_begin, t_end), rad/s.
 *
 * Close to zero when the slave is frequency locked to the master.
 */
double injection_lock_residual(FieldTrajectory const& master,
                               FieldTrajectory const& slave,
                               InjectionParams const& inj,
                               double t_begin,
                               double t_end);

//! CSV with header t_ns,N,Q,phi_rad,P_mW.
void write_trajectory_csv(std::ostream& os, FieldTrajectory const& traj);

}  // namespace mfqkd
