#include "mfqkd/laser.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <string>

#include "mfqkd/rng.hpp"

namespace mfqkd
{
namespace
{

void require(bool ok, char const* what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

// Integration time steps finer than this resolve the 100 GHz beat note.
constexpr double kMaxStep = 1.0e-12;

struct Deriv3
{
    double dn, dq, dphi;
};

// Free-running rate equations (also the master's equations).
inline Deriv3 free_rhs(LaserParams const& p, double ppp, double current, double n, double q)
{
    double const gl = linear_gain(n, p);
    double const g = gl / std::sqrt(1.0 + 2.0 * p.gamma_p * ppp * std::max(q, 0.0));
    return {current / kElectronCharge - n / p.tau_e - q * g / (p.gamma_conf * p.tau_ph),
            (g - 1.0) * q / p.tau_ph + p.c_sp * n / p.tau_e,
            p.alpha / (2.0 * p.tau_ph) * (gl - 1.0)};
}

std::size_t drive_index(PumpWaveform const& drive, double t)
{
    auto idx = static_cast<std::size_t>(std::floor(t / drive.dt + 1e-9));
    return std::min(idx, drive.samples.size() - 1);
}

void check_state(double& value, double tol, char const* name, double t)
{
    if (!std::isfinite(value))
        throw IntegrationError(std::string("non-finite ") + name + " at t = " + std::to_string(t * 1e9) + " ns");
    if (value < 0.0)
    {
        if (value < -tol)
            throw IntegrationError(std::string("negative ") + name + " = " + std::to_string(value) + " at t = "
                                   + std::to_string(t * 1e9) + " ns");
        value = 0.0;
    }
}

void reserve(FieldTrajectory& traj, std::size_t n, double dt)
{
    traj.dt = dt;
    traj.n_series.reserve(n);
    traj.q_series.reserve(n);
    traj.phi_series.reserve(n);
    traj.power_series.reserve(n);
}

void push(FieldTrajectory& traj, double n, double q, double phi, double ppp)
{
    traj.n_series.push_back(n);
    traj.q_series.push_back(q);
    traj.phi_series.push_back(phi);
    traj.power_series.push_back(q * ppp);
}

std::vector<std::size_t> reset_steps(IntegrationOptions const& options, double dt)
{
    std::vector<std::size_t> steps;
    steps.reserve(options.master_phase_resets.size());
    for (double t : options.master_phase_resets)
        steps.push_back(static_cast<std::size_t>(std::ceil(t / dt - 1e-9)));
    std::sort(steps.begin(), steps.end());
    return steps;
}

// Shared RK4 core. With `slave == nullptr` only the master equations run; the
// master arithmetic is identical in both modes so the master trajectory does
// not depend on whether a slave is attached.
TrajectoryPair integrate_core(LaserParams const& master,
                              LaserParams const* slave,
                              InjectionParams const& inj,
                              PumpWaveform const& master_drive,
                              PumpWaveform const* slave_drive,
                              LaserState const& master_init,
                              LaserState const& slave_init,
                              double dt,
                              IntegrationOptions const& options)
{
    require(dt > 0.0, "integration step dt must be positive");
    require(dt <= kMaxStep * (1.0 + 1e-9), "integration step dt must not exceed 1 ps");
    require(options.output_stride >= 1, "output_stride must be at least 1");
    master.validate();
    master_drive.validate();
    require(master_init.n >= 0.0 && master_init.q >= 0.0, "initial master state must be non-negative");
    if (slave)
    {
        slave->validate();
        inj.validate();
        slave_drive->validate();
        require(std::abs(master_drive.duration() - slave_drive->duration())
                    <= 0.5 * std::max(master_drive.dt, slave_drive->dt),
                "master and slave drives must cover the same duration");
        require(slave_init.n >= 0.0 && slave_init.q >= 0.0, "initial slave state must be non-negative");
    }

    auto const steps = static_cast<std::size_t>(std::llround(master_drive.duration() / dt));
    TrajectoryPair out;
    std::size_t const kept = (steps + options.output_stride - 1) / options.output_stride;
    double const out_dt = dt * static_cast<double>(options.output_stride);
    reserve(out.master, kept, out_dt);
    if (slave)
        reserve(out.slave, kept, out_dt);
    if (steps == 0)
        return out;

    double const ppp_m = master.power_per_photon();
    double const ppp_s = slave ? slave->power_per_photon() : 0.0;
    double const q_floor = options.q_floor;
    double const tol = options.negative_tolerance;

    // State layout: master (n, q, phi), slave (n, q, phi).
    std::array<double, 6> y{master_init.n, master_init.q, master_init.phi,
                            slave_init.n,  slave_init.q,  slave_init.phi};

    auto rhs = [&](double t, std::array<double, 6> const& s, double im, double is) {
        std::array<double, 6> d{};
        auto const dm = free_rhs(master, ppp_m, im, s[0], s[1]);
        d[0] = dm.dn;
        d[1] = dm.dq;
        d[2] = dm.dphi;
        if (slave)
        {
            auto const ds = free_rhs(*slave, ppp_s, is, s[3], s[4]);
            double const qm = std::max(s[1], 0.0);
            double const qs = std::max(s[4], 0.0);
            double const arg = inj.delta_omega * t + s[2] - s[5];
            d[3] = ds.dn;
            d[4] = ds.dq + 2.0 * inj.kappa_inj * std::sqrt(qm * qs) * std::cos(arg);
            d[5] = ds.dphi
                   + inj.kappa_inj * std::sqrt(qm / std::max(qs, q_floor)) * std::sin(arg);
        }
        return d;
    };

    std::size_t const width = slave ? 6 : 3;
    auto axpy = [width](std::array<double, 6> const& base, double h, std::array<double, 6> const& k) {
        std::array<double, 6> r = base;
        for (std::size_t j = 0; j < width; ++j)
            r[j] = base[j] + h * k[j];
        return r;
    };

    auto rk4 = [&](double t0, double h, std::array<double, 6> const& y0, double im, double is) {
        auto const k1 = rhs(t0, y0, im, is);
        auto const k2 = rhs(t0 + 0.5 * h, axpy(y0, 0.5 * h, k1), im, is);
        auto const k3 = rhs(t0 + 0.5 * h, axpy(y0, 0.5 * h, k2), im, is);
        auto const k4 = rhs(t0 + h, axpy(y0, h, k3), im, is);
        auto r = y0;
        for (std::size_t j = 0; j < width; ++j)
            r[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        return r;
    };
    // sqrt(Q_M Q) has an unbounded slope at Q = 0, so a step through a
    // destructive-interference null can overshoot by ~ (h kappa)^2 Q_M.
    // Such steps are split in halves until the overshoot is below tol.
    auto overshoots = [&](std::array<double, 6> const& r) {
        for (std::size_t j = 0; j < width; ++j)
            if (j % 3 != 2 && r[j] < -tol)
                return true;
        return false;
    };
    std::function<std::array<double, 6>(double, double, std::array<double, 6> const&, double, double, int)> advance;
    advance = [&](double t0, double h, std::array<double, 6> const& y0, double im, double is, int depth) {
        auto r = rk4(t0, h, y0, im, is);
        if (depth >= 24 || !overshoots(r))
            return r;
        auto mid = advance(t0, 0.5 * h, y0, im, is, depth + 1);
        for (std::size_t j = 0; j < width; ++j)
            if (j % 3 != 2)
                mid[j] = std::max(mid[j], 0.0);
        return advance(t0 + 0.5 * h, 0.5 * h, mid, im, is, depth + 1);
    };

    auto const resets = reset_steps(options, dt);
    auto next_reset = resets.begin();
    std::uint64_t reset_count = 0;

    for (std::size_t i = 0; i < steps; ++i)
    {
        double const t = dt * static_cast<double>(i);
        while (next_reset != resets.end() && *next_reset <= i)
        {
            if (*next_reset == i)
            {
                StreamRng rng(options.phase_seed, reset_count);
                y[2] = 2.0 * kPi * rng.uniform();
            }
            ++reset_count;
            ++next_reset;
        }

        if (i % options.output_stride == 0)
        {
            push(out.master, y[0], y[1], y[2], ppp_m);
            if (slave)
                push(out.slave, y[3], y[4], y[5], ppp_s);
        }
        if (i + 1 == steps)
            break;

        double const im = master_drive.samples[drive_index(master_drive, t)];
        double const is = slave ? slave_drive->samples[drive_index(*slave_drive, t)] : 0.0;
        y = advance(t, dt, y, im, is, 0);

        double const t_next = t + dt;
        check_state(y[0], tol, "master carrier number", t_next);
        check_state(y[1], tol, "master photon number", t_next);
        if (!std::isfinite(y[2]))
            throw IntegrationError("non-finite master phase");
        if (slave)
        {
            check_state(y[3], tol, "slave carrier number", t_next);
            check_state(y[4], tol, "slave photon number", t_next);
            if (!std::isfinite(y[5]))
                throw IntegrationError("non-finite slave phase");
        }
    }
    return out;
}

}  // namespace

void LaserParams::validate() const
{
    require(tau_ph > 0.0, "tau_ph must be positive");
    require(tau_e > 0.0, "tau_e must be positive");
    require(photon_energy > 0.0, "photon_energy must be positive");
    require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    require(gamma_conf > 0.0 && gamma_conf <= 1.0, "gamma_conf must lie in (0, 1]");
    require(c_sp >= 0.0, "c_sp must be non-negative");
    require(gamma_p >= 0.0, "gamma_p must be non-negative");
    require(n_tr >= 0.0, "n_tr must be non-negative");
    require(n_tr < n_th, "n_tr must be below n_th");
}

LaserParams LaserParams::reference_master()
{
    LaserParams p;
    p.gamma_p = 30.0;
    return p;
}

LaserParams LaserParams::reference_slave()
{
    return LaserParams{};
}

void InjectionParams::validate() const
{
    require(kappa_inj >= 0.0, "kappa_inj must be non-negative");
    require(std::isfinite(delta_omega), "delta_omega must be finite");
}

void PumpWaveform::validate() const
{
    require(dt > 0.0, "pump waveform dt must be positive");
    for (double c : samples)
        require(c >= 0.0 && std::isfinite(c), "pump currents must be finite and non-negative");
}

double linear_gain(double n, LaserParams const& params)
{
    return (n - params.n_tr) / (params.n_th - params.n_tr);
}

double saturated_gain(double n, double p, LaserParams const& params)
{
    return linear_gain(n, params) / std::sqrt(1.0 + 2.0 * params.gamma_p * p);
}

TrajectoryPair integrate(LaserParams const& master,
                         LaserParams const& slave,
                         InjectionParams const& inj,
                         PumpWaveform const& master_drive,
                         PumpWaveform const& slave_drive,
                         LaserState const& master_init,
                         LaserState const& slave_init,
                         double dt,
                         IntegrationOptions const& options)
{
    return integrate_core(
        master, &slave, inj, master_drive, &slave_drive, master_init, slave_init, dt, options);
}

FieldTrajectory integrate_free(LaserParams const& params,
                               PumpWaveform const& drive,
                               LaserState const& init,
                               double dt,
                               IntegrationOptions const& options)
{
    return integrate_core(params, nullptr, InjectionParams{}, drive, nullptr, init, {}, dt, options)
        .master;
}

LaserState relax_to_bias(LaserParams const& params, double current, double duration, double dt)
{
    PumpWaveform drive{dt, std::vector<double>(static_cast<std::size_t>(std::llround(duration / dt)) + 1, current)};
    auto traj = integrate_free(params, drive, LaserState{params.n_tr, 1.0, 0.0}, dt);
    return {traj.n_series.back(), traj.q_series.back(), 0.0};
}

double injection_lock_residual(FieldTrajectory const& master,
                               FieldTrajectory const& slave,
                               InjectionParams const& inj,
                               double t_begin,
                               double t_end)
{
    require(master.size() == slave.size() && master.dt == slave.dt,
            "trajectories must share one time grid");
    require(master.dt > 0.0, "trajectory dt must be positive");
    auto const first = static_cast<std::size_t>(std::max(0.0, std::ceil(t_begin / master.dt - 1e-9)));
    auto const last = std::min(master.size(),
                               static_cast<std::size_t>(std::max(0.0, std::ceil(t_end / master.dt - 1e-9))));
    if (last <= first + 1)
        throw std::invalid_argument("lock residual window is empty");

    auto arg = [&](std::size_t i) {
        return inj.delta_omega * master.time(i) + master.phi_series[i] - slave.phi_series[i];
    };
    double acc = 0.0;
    for (std::size_t i = first; i + 1 < last; ++i)
        acc += std::abs(arg(i + 1) - arg(i)) / master.dt;
    return acc / static_cast<double>(last - first - 1);
}

void write_trajectory_csv(std::ostream& os, FieldTrajectory const& traj)
{
    os << "t_ns,N,Q,phi_rad,P_mW\n";
    os << std::setprecision(12);
    for (std::size_t i = 0; i < traj.size(); ++i)
    {
        os << traj.time(i) * 1e9 << ',' << traj.n_series[i] << ',' << traj.q_series[i] << ','
           << traj.phi_series[i] << ',' << traj.power_series[i] * 1e3 << '\n';
    }
}

}  // namespace mfqkd
