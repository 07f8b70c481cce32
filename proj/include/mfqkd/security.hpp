#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace mfqkd
{

//! Fiber channel and detection model parameters.
struct ChannelParams
{
    double xi = 0.2;         // fiber loss, dB/km
    double distance = 0.0;   // km
    double p_dc = 1e-6;      // dark count probability per gate
    double eta_det = 0.15;   // detection efficiency
    double e_d = 0.01;       // detection error probability

    void validate() const;
    //! Channel transmittance t = 10^(-xi L / 10).
    double transmittance() const;
};

struct NoDecoyIntensities
{
    double mu = 0.024;
    double nu = 0.048;
};

//! Signal (index 0) and two decoy intensities per basis.
struct DecoyIntensities
{
    double mu0 = 0.657;
    double mu1 = 0.033;
    double mu2 = 0.0;
    double nu0 = 1.314;
    double nu1 = 0.066;
    double nu2 = 0.0;
};

using SourceIntensities = std::variant<NoDecoyIntensities, DecoyIntensities>;

//! Throws std::invalid_argument naming the violated ordering condition.
void validate_intensities(SourceIntensities const& source);

struct ProtocolConfig
{
    double pA_z = 0.5;
    double pA_x = 0.5;
    double pB_z = 0.5;
    double pB_x = 0.5;
    double f_ec = 1.22;
    double f_prep = 100e6;  // Hz

    void validate() const;
    //! Sifted-event probabilities (p_Z, p_X) conditioned on matching bases.
    std::pair<double, double> sifted_probabilities() const;
};

struct GainError
{
    double q = 0.0;  // gain
    double e = 0.0;  // error rate
};

enum class KeyStatus
{
    ok,
    insecure,
};

std::string_view to_string(KeyStatus s);

struct SecrecyBounds
{
    double q_low = 0.0;
    double e_up_z = 0.0;
    double e_up_x = 0.0;
    std::optional<double> y0_low;  // decoy mode only
    bool determinate = true;
};

struct KeyRatePoint
{
    double distance = 0.0;
    bool decoy = false;
    //! Signal-intensity gain/error in the Z and X bases.
    GainError signal_z;
    GainError signal_x;
    //! All per-intensity values, ordered (signal, decoy 1, decoy 2) in decoy mode.
    std::vector<GainError> gains_z;
    std::vector<GainError> gains_x;
    SecrecyBounds bounds;
    double r_reduction = 0.0;
    double kappa = 0.0;
    double rate_per_pulse = 0.0;
    double bits_per_second = 0.0;      // R f pA_z pB_z
    double bits_per_second_raw = 0.0;  // R f
    KeyStatus status = KeyStatus::ok;
};

//! Base-2 binary entropy; throws std::invalid_argument outside [0, 1].
double binary_entropy(double p);

//! Poisson-channel gain and error rate of an intensity-gamma source.
GainError channel_model(double gamma, ChannelParams const& ch);

struct DecoyEstimate
{
    double y0_low = 0.0;
    double y1_low = 0.0;
    double q1_low = 0.0;
    //! Undefined when y1_low == 0.
    std::optional<double> e1_up;
};

/*!
 * Vacuum+weak decoy estimates of the single-photon yield, gain and error.
 *
 * `gains[i]` must be the measured gain/error at `intensities[i]`, with
 * 0 <= i2 < i1 and i1 + i2 < i0.
 */
DecoyEstimate decoy_bounds(std::array<GainError, 3> const& gains, std::array<double, 3> const& intensities);

struct FLReduction
{
    double r = 0.0;
    double kappa = 0.0;
    std::optional<double> delta;  // maximizer; empty when the feasible set is empty
    double eps_aux = 0.0;
};

//! Auxiliary epsilon(delta) of the three-state phase-error bound; nullopt where infeasible.
std::optional<double> fl_epsilon(double omega, double theta, double delta);

/*!
 * Three-state privacy amplification factor r(omega, theta) = 1 - h(kappa).
 *
 * kappa = omega * max over feasible delta in [0, 1] of eps(delta)^2 + delta^2,
 * clamped to 0.5; r is clamped at 0.
 */
FLReduction fl_reduction(double omega, double theta);

/*!
 * Worst-case vacuum+single-photon bounds without decoys.
 *
 * Q_{0+1} = Q_mu - 1 + (1 + mu) e^{-mu}; the error bounds divide the
 * measured error counts by the lower bound.
 */
SecrecyBounds no_decoy_bounds(GainError const& z, GainError const& x, double mu, double nu);

//! Key rate from measured signal gains in no-decoy mode (shared by analytic and empirical paths).
KeyRatePoint no_decoy_rate(GainError const& z,
                           GainError const& x,
                           NoDecoyIntensities const& source,
                           ProtocolConfig const& cfg,
                           double distance);

KeyRatePoint secret_key_rate(SourceIntensities const& source,
                             ChannelParams const& ch,
                             ProtocolConfig const& cfg);

struct DistanceScan
{
    std::vector<KeyRatePoint> points;
    //! Largest secure distance (bisection-refined to 0.1 km); empty if none.
    std::optional<double> max_distance;
};

/*!
 * Key rate on the grid l_min, l_min + step, ... <= l_max. Grid points are
 * evaluated concurrently when `threads` > 1; the result is ordered by distance.
 */
DistanceScan scan_distance(SourceIntensities const& source,
                           ChannelParams const& ch_template,
                           ProtocolConfig const& cfg,
                           double l_min,
                           double l_max,
                           double step,
                           unsigned threads = 1);

}  // namespace mfqkd
