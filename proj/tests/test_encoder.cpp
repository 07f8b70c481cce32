#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "mfqkd/encoder.hpp"
#include "mfqkd/scenario.hpp"

using namespace mfqkd;

namespace
{

constexpr double kDt = 0.1e-12;

ComplexFieldTrace tone(double f, std::size_t n, double amplitude = 1.0)
{
    ComplexFieldTrace t;
    t.dt = kDt;
    for (std::size_t i = 0; i < n; ++i)
        t.samples.push_back(std::polar(amplitude, 2.0 * kPi * f * static_cast<double>(i) * kDt));
    return t;
}

ScenarioResult const& reference()
{
    static ScenarioResult const r = run_scenario(ScenarioConfig{});
    return r;
}

std::vector<StateSymbol> const kReferenceSequence{StateSymbol::Z0, StateSymbol::X0, StateSymbol::Z1, StateSymbol::X0,
                                     StateSymbol::Z0};

}  // namespace

TEST_SUITE("encoder")
{
    TEST_CASE("symbol parsing")
    {
        CHECK(parse_symbol("Z0") == StateSymbol::Z0);
        CHECK(parse_symbol("Z1") == StateSymbol::Z1);
        CHECK(parse_symbol("X0") == StateSymbol::X0);
        CHECK_THROWS_AS(parse_symbol("X1"), std::invalid_argument);
        CHECK_THROWS_AS(parse_symbol(""), std::invalid_argument);
        for (auto s : {StateSymbol::Z0, StateSymbol::Z1, StateSymbol::X0})
            CHECK(parse_symbol(to_string(s)) == s);
    }

    TEST_CASE("random sequences are seeded and follow the basis probability")
    {
        auto const a = random_sequence(20000, 7, 0.5);
        CHECK(a == random_sequence(20000, 7, 0.5));
        CHECK(a != random_sequence(20000, 8, 0.5));
        auto const x = std::count(a.begin(), a.end(), StateSymbol::X0);
        CHECK(std::abs(static_cast<double>(x) - 10000.0) < 4.0 * std::sqrt(5000.0));
    }

    TEST_CASE("timing and level validation")
    {
        EncodingTiming t;
        CHECK_NOTHROW(t.validate());
        t.master_short_width = 0.5 * t.bin_period;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
        t = EncodingTiming{};
        t.master_long_width = 2.6 * t.bin_period;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);
        t = EncodingTiming{};
        t.state_gap = -1e-12;
        CHECK_THROWS_AS(t.validate(), std::invalid_argument);

        DriveLevels l = DriveLevels::reference(8.8e-3, 8.8e-3);
        CHECK_NOTHROW(l.validate());
        l.slave_pulse = 0.5 * l.slave_bias;
        CHECK_THROWS_WITH_AS(l.validate(), doctest::Contains("slave_pulse"), std::invalid_argument);
    }

    TEST_CASE("drive for the reference sequence")
    {
        EncodingTiming const timing;
        DriveLevels const lv = DriveLevels::reference(8.8e-3, 8.8e-3);
        auto const d = build_drive(kReferenceSequence, timing, lv, kDt);
        std::size_t const nb = d.samples_per_bin;
        CHECK(nb == 8000);
        CHECK(d.master.samples.size() == d.slave.samples.size());
        CHECK(d.master.samples.size() == (d.preamble_bins + 4 * kReferenceSequence.size()) * nb);

        // Slave: one 300 ps pulse at the start of every bin.
        for (std::size_t b = 0; b < d.slave.samples.size() / nb; ++b)
        {
            CHECK(d.slave.samples[b * nb] == lv.slave_pulse);
            CHECK(d.slave.samples[b * nb + 2999] == lv.slave_pulse);
            CHECK(d.slave.samples[b * nb + 3000] == lv.slave_bias);
        }

        // Master: maximal runs of pulse current, in order short/long/short/long/short.
        std::vector<std::pair<std::size_t, std::size_t>> runs;
        for (std::size_t i = 0; i < d.master.samples.size(); ++i)
        {
            if (d.master.samples[i] != lv.master_pulse)
                continue;
            std::size_t j = i;
            while (j < d.master.samples.size() && d.master.samples[j] == lv.master_pulse)
                ++j;
            runs.emplace_back(i, j - i);
            i = j;
        }
        REQUIRE(runs.size() == 5);
        std::vector<std::size_t> const widths{8000, 16000, 8000, 16000, 8000};
        std::size_t const lead = 2000;
        for (std::size_t k = 0; k < 5; ++k)
        {
            CHECK(runs[k].second == widths[k]);
            std::size_t const slot0 = (d.preamble_bins + 4 * k) * nb;
            std::size_t const target = kReferenceSequence[k] == StateSymbol::Z1 ? slot0 + nb : slot0;
            CHECK(runs[k].first + lead == target);
        }
        CHECK(d.gap_starts.size() == 5);
    }

    TEST_CASE("empty sequence gives empty waveforms; a single Z1 gives one late short pulse")
    {
        EncodingTiming const timing;
        DriveLevels const lv = DriveLevels::reference(8.8e-3, 8.8e-3);
        auto const e = build_drive({}, timing, lv, kDt);
        CHECK(e.master.samples.empty());
        CHECK(e.slave.samples.empty());

        auto const z1 = build_drive({StateSymbol::Z1}, timing, lv, kDt);
        auto const n = std::count(z1.master.samples.begin(), z1.master.samples.end(), lv.master_pulse);
        CHECK(n == 8000);
        auto const first = std::find(z1.master.samples.begin(), z1.master.samples.end(), lv.master_pulse)
                           - z1.master.samples.begin();
        CHECK(static_cast<std::size_t>(first) == (z1.preamble_bins + 1) * z1.samples_per_bin - 2000);
    }

    TEST_CASE("drive timing must sit on the grid")
    {
        EncodingTiming t;
        t.bin_period = 800.05e-12;
        t.state_gap = 2.0 * t.bin_period;
        t.master_short_width = t.bin_period;
        t.master_long_width = 2.0 * t.bin_period;
        CHECK_THROWS_AS(build_drive(kReferenceSequence, t, DriveLevels::reference(8.8e-3, 8.8e-3), kDt), std::invalid_argument);
    }

    TEST_CASE("assembled field")
    {
        FieldTrajectory tr;
        tr.dt = kDt;
        double const f = 20e9;
        for (int i = 0; i < 1000; ++i)
        {
            tr.power_series.push_back(1e-3);
            tr.phi_series.push_back(2.0 * kPi * f * i * kDt);
            tr.n_series.push_back(0.0);
            tr.q_series.push_back(0.0);
        }
        auto const rot = assemble_field(tr, -f);
        for (auto const& s : rot.samples)
        {
            CHECK(std::abs(s) == doctest::Approx(std::sqrt(1e-3)).epsilon(1e-12));
            CHECK(std::abs(std::arg(s)) < 1e-6);
        }
        std::fill(tr.phi_series.begin(), tr.phi_series.end(), 0.0);
        auto const flat = assemble_field(tr, 0.0);
        CHECK(flat.samples[500].real() == std::sqrt(1e-3));
        CHECK(flat.samples[500].imag() == 0.0);
        auto const p = power_of(flat);
        CHECK(p.samples[10] == doctest::Approx(1e-3).epsilon(1e-14));
    }

    TEST_CASE("butterworth tone responses")
    {
        FilterSpec const spec;
        std::size_t const n = 1 << 14;
        // Tones placed exactly on DFT bins so there is no leakage.
        double const df = 1.0 / (static_cast<double>(n) * kDt);
        auto on_bin = [&](double f) { return std::round(f / df) * df; };
        for (double target : {spec.center_offset, spec.center_offset + spec.half_width,
                              spec.center_offset + 2.0 * spec.half_width})
        {
            double const f = on_bin(target);
            auto const out = butterworth_filter(tone(f, n), spec);
            double const expected = butterworth_gain(f, spec);
            for (std::size_t i = 0; i < n; i += 1111)
                CHECK(std::abs(out.samples[i]) == doctest::Approx(expected).epsilon(1e-4));
        }
        CHECK(butterworth_gain(spec.center_offset, spec) == 1.0);
        CHECK(butterworth_gain(spec.center_offset + spec.half_width, spec)
              == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(butterworth_gain(spec.center_offset + 2.0 * spec.half_width, spec)
              == doctest::Approx(1.0 / std::sqrt(17.0)).epsilon(1e-12));
    }

    TEST_CASE("butterworth filter keeps the length and rejects bad specs")
    {
        auto const out = butterworth_filter(tone(0.0, 777), FilterSpec{});
        CHECK(out.samples.size() == 777);
        FilterSpec bad;
        bad.order = 0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = FilterSpec{};
        bad.half_width = 0.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        CHECK_THROWS_AS(butterworth_filter(ComplexFieldTrace{kDt, {}}, FilterSpec{}), std::invalid_argument);
    }

    TEST_CASE("interferometer on a CW field")
    {
        auto const cw = tone(0.0, 20000, std::sqrt(2e-3));
        auto const a = mzi_interfere(cw, {800e-12, 0.0});
        auto const b = mzi_interfere(cw, {800e-12, kPi});
        for (std::size_t i = 8000; i < 20000; i += 501)
        {
            CHECK(a.constructive.samples[i] == doctest::Approx(2e-3).epsilon(1e-12));
            CHECK(a.destructive.samples[i] < 1e-15);
            CHECK(b.destructive.samples[i] == doctest::Approx(2e-3).epsilon(1e-12));
            CHECK(b.constructive.samples[i] < 1e-15);
        }
        // Before the delay only the direct arm contributes.
        CHECK(a.constructive.samples[100] == doctest::Approx(0.5e-3).epsilon(1e-12));
        CHECK_THROWS_AS(mzi_interfere(cw, {3e-9, 0.0}), std::invalid_argument);
        CHECK_THROWS_AS(mzi_interfere(cw, {800.05e-12, 0.0}), std::invalid_argument);
        CHECK_THROWS_AS(mzi_interfere(cw, {0.0, 0.0}), std::invalid_argument);
    }

    TEST_CASE("theta calibration finds the constructive phase")
    {
        // E(t - d) leads E(t) by a known phase phi0 at the interferometer output.
        double const f = 3e9;
        auto const cw = tone(f, 30000);
        double const d = 800e-12;
        double const theta = calibrate_theta(cw, d, {{1e-9, 3e-9}}, 3600);
        double const expected = std::fmod(2.0 * kPi * f * d, 2.0 * kPi);
        double diff = std::remainder(theta - expected, 2.0 * kPi);
        CHECK(std::abs(diff) < 2.0 * kPi / 3600.0);
    }

    TEST_CASE("bin analysis")
    {
        EncodingTiming const timing;
        // One preamble bin, then four bins per slot.
        PowerTrace zero{kDt, std::vector<double>((1 + 4 * 2) * 8000, 0.0)};
        InterferenceOutput const io{zero, zero};
        auto const m = analyze_bins(zero, io, {StateSymbol::Z0, StateSymbol::X0}, timing, 60.0, 0.8 * kElectronCharge);
        REQUIRE(m.size() == 2);
        for (auto const& x : m)
        {
            CHECK(x.mu_hat == 0.0);
            CHECK(x.visibility >= 0.0);
            CHECK(x.visibility <= 1.0);
        }

        // 1 mW x 100 ps at 0.8 eV through 60 dB.
        PowerTrace pulse{kDt, std::vector<double>(5 * 8000, 0.0)};
        std::fill_n(pulse.samples.begin() + 8000, 1000, 1e-3);
        InterferenceOutput const io1{pulse, pulse};
        auto const one = analyze_bins(pulse, io1, {StateSymbol::Z0}, timing, 60.0, 0.8 * kElectronCharge);
        CHECK(one[0].bin0_energy == doctest::Approx(1e-13).epsilon(1e-9));
        CHECK(one[0].mu_hat == doctest::Approx(0.780).epsilon(1e-3));
        CHECK(attenuation_for_mu(1e-13, 0.8 * kElectronCharge, 0.780216) == doctest::Approx(60.0).epsilon(1e-4));
    }

    TEST_CASE("slot decoding")
    {
        EncodingTiming const timing;
        std::vector<double> e{0.0, 1.0, 0.01, 0.0, 0.0, 0.01, 1.0, 0.0, 0.0, 1.0, 0.9, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0};
        auto const d = decode_slots(e, timing, 4);
        REQUIRE(d.size() == 4);
        CHECK(d[0] == StateSymbol::Z0);
        CHECK(d[1] == StateSymbol::Z1);
        CHECK(d[2] == StateSymbol::X0);
        CHECK_FALSE(d[3].has_value());
    }

    TEST_CASE("reference scenario: photon numbers and interference")
    {
        auto const& r = reference();
        REQUIRE(r.metrics.size() == 5);
        CHECK(r.decoded_matches(kReferenceSequence));
        double z_mu = 0.0;
        int nz = 0;
        for (auto const& m : r.metrics)
            if (m.symbol != StateSymbol::X0)
            {
                z_mu += m.mu_hat;
                ++nz;
            }
        CHECK(z_mu / nz == doctest::Approx(0.024).epsilon(1e-9));
        for (auto const& m : r.metrics)
            if (m.symbol == StateSymbol::X0)
            {
                CHECK(m.mu_hat == doctest::Approx(2.0 * 0.024).epsilon(0.1));
                CHECK(m.visibility >= 0.9);
            }
    }

    TEST_CASE("reference scenario: spectra of locked and free-running slave pulses")
    {
        auto const& r = reference();
        double const t = 800e-12;
        double const origin = r.drive.origin();
        // Slot 0 is Z0: its early bin is locked, its late bin free running.
        // Both peaks carry the lasers' chirp, so compare them with the master
        // and with each other rather than with the nominal offsets.
        ScenarioConfig const cfg;
        auto const master = assemble_field(r.trajectories.master, cfg.injection.delta_omega / (2.0 * kPi));
        double const resolution = 1.0 / t;
        double const locked = spectral_peak(r.slave_field, origin, origin + t);
        double const free = spectral_peak(r.slave_field, origin + t, origin + 2.0 * t);
        CHECK(std::abs(locked - spectral_peak(master, origin, origin + t)) <= resolution);
        CHECK(std::abs((free - locked) - 100e9) <= 2.0 * resolution);
    }

    TEST_CASE("scenario csv header")
    {
        std::ostringstream os;
        write_scenario_csv(os, reference());
        CHECK(os.str().rfind("t_ns,P_master_mW,P_slave_mW,P_filtered_mW,P_constructive_mW,P_destructive_mW\n", 0)
              == 0);
    }
}

TEST_SUITE("encoder invariants")
{
    TEST_CASE("filter passivity")
    {
        auto const& r = reference();
        auto const in = forward_dft(r.slave_field.samples);
        auto const out = forward_dft(r.filtered_field.samples);
        double ein = 0.0, eout = 0.0;
        for (std::size_t k = 0; k < in.size(); ++k)
        {
            CHECK_MESSAGE(std::abs(out[k]) <= std::abs(in[k]) * (1.0 + 1e-9) + 1e-18, "bin ", k);
            ein += std::norm(in[k]);
            eout += std::norm(out[k]);
        }
        CHECK(eout < ein);
        double tin = 0.0, tout = 0.0;
        for (std::size_t i = 0; i < in.size(); ++i)
        {
            tin += std::norm(r.slave_field.samples[i]);
            tout += std::norm(r.filtered_field.samples[i]);
        }
        CHECK(tout <= tin);
    }

    TEST_CASE("interferometer energy conservation at any theta")
    {
        auto const& r = reference();
        auto const& e = r.filtered_field.samples;
        std::size_t const d = 8000;
        for (double theta : {0.0, 0.4, 1.3, kPi, 5.9})
        {
            auto const io = mzi_interfere(r.filtered_field, {800e-12, theta});
            double worst = 0.0;
            for (std::size_t i = 0; i < e.size(); ++i)
            {
                double const delayed = i >= d ? std::norm(e[i - d]) : 0.0;
                double const expect = 0.5 * (std::norm(e[i]) + delayed);
                double const got = io.constructive.samples[i] + io.destructive.samples[i];
                worst = std::max(worst, std::abs(got - expect) / std::max(expect, 1e-30));
            }
            CHECK(worst < 1e-9);
        }
    }

    TEST_CASE("drive synthesis is deterministic")
    {
        auto const lv = DriveLevels::reference(8.8e-3, 8.8e-3);
        auto const seq = random_sequence(50, 3, 0.5);
        auto const a = build_drive(seq, EncodingTiming{}, lv, kDt);
        auto const b = build_drive(seq, EncodingTiming{}, lv, kDt);
        CHECK(a.master.samples == b.master.samples);
        CHECK(a.slave.samples == b.slave.samples);
    }

    TEST_CASE("filtering selects the locked pulses")
    {
        auto const& r = reference();
        double lit_min = INFINITY, dark_max = 0.0;
        for (std::size_t b = 0; b < r.filtered_bin_energies.size(); ++b)
        {
            if (b < r.drive.preamble_bins)
                continue;
            if (r.designated[b])
                lit_min = std::min(lit_min, r.filtered_bin_energies[b]);
            else
                dark_max = std::max(dark_max, r.filtered_bin_energies[b]);
        }
        CHECK(lit_min >= 10.0 * dark_max);
        for (auto const& m : r.metrics)
        {
            CHECK(m.extinction_db >= 10.0);
            CHECK(m.bin0_energy >= 0.0);
            CHECK(m.bin1_energy >= 0.0);
        }
    }

    TEST_CASE("visibility of a CW field is one at any theta")
    {
        // (Ec - Ed)/(Ec + Ed) at a single theta is cos of the residual phase,
        // so it is 1 only at the calibrated phase. The phase-independent form
        // combines two quadratures: sqrt(V(theta)^2 + V(theta + pi/2)^2).
        EncodingTiming const timing;
        std::vector<StateSymbol> const seq{StateSymbol::X0, StateSymbol::X0};
        std::size_t const n = (1 + 8) * 8000;
        for (double f : {0.0, 0.37e9, 2.1e9})
        {
            auto const cw = tone(f, n, 1e-2);
            double const theta_cal = calibrate_theta(cw, 800e-12, {{800e-12, 1600e-12}}, 7200);
            auto const io = mzi_interfere(cw, {800e-12, theta_cal});
            auto const m = analyze_bins(power_of(cw), io, seq, timing, 0.0, 0.8 * kElectronCharge);
            for (auto const& x : m)
                CHECK(x.visibility == doctest::Approx(1.0).epsilon(1e-6));

            for (double theta : {0.0, 1.0, 2.5, 4.0, 5.5})
            {
                auto const a = mzi_interfere(cw, {800e-12, theta});
                auto const b = mzi_interfere(cw, {800e-12, theta + 0.5 * kPi});
                auto const ca = bin_energies(a.constructive, 800e-12);
                auto const da = bin_energies(a.destructive, 800e-12);
                auto const cb = bin_energies(b.constructive, 800e-12);
                auto const db = bin_energies(b.destructive, 800e-12);
                for (std::size_t bin = 1; bin < ca.size(); ++bin)
                {
                    double const va = (ca[bin] - da[bin]) / (ca[bin] + da[bin]);
                    double const vb = (cb[bin] - db[bin]) / (cb[bin] + db[bin]);
                    CHECK(std::hypot(va, vb) == doctest::Approx(1.0).epsilon(1e-9));
                }
            }
        }
    }
}
