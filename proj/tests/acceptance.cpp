// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "mfqkd/encoder.hpp"
#include "mfqkd/montecarlo.hpp"
#include "mfqkd/scenario.hpp"
#include "mfqkd/security.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mfqkd;
using Clock = std::chrono::steady_clock;

namespace
{

int failures = 0;

void report(int id, std::string const& name, bool ok, std::string const& detail)
{
    std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int run(std::string const& cmd)
{
    int const status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(fs::path const& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(char const* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path const work = fs::temp_directory_path() / "mfqkd_acceptance";

void scan_criteria()
{
    auto const out = work / "scan";
    auto const t0 = Clock::now();
    int const rc = run(std::string(MFQKD_CLI) + " scan --from 0 --to 200 --step 1 --out '" + out.string()
                       + "' > /dev/null");
    double const elapsed = seconds_since(t0);
    if (rc != 0 || !fs::exists(out / "scan_summary.json"))
    {
        report(1, "no-decoy max distance", false, fmt("scan exited with %d", rc));
        report(2, "decoy/no-decoy ratio", false, fmt("scan exited with %d", rc));
        return;
    }
    auto const s = nlohmann::json::parse(slurp(out / "scan_summary.json"));
    double const nd = s["no_decoy"]["max_distance_km"].get<double>();
    double const dc = s["decoy"]["max_distance_km"].get<double>();
    double const ratio = s["ratio"].get<double>();
    report(1, "no-decoy max distance in [36, 44] km, < 5 s", nd >= 36.0 && nd <= 44.0 && elapsed < 5.0,
           fmt("max_distance = %.1f km, runtime %.2f s", nd, elapsed));
    report(2, "decoy/no-decoy max-distance ratio in [4.0, 5.0], < 10 s",
           ratio >= 4.0 && ratio <= 5.0 && elapsed < 10.0,
           fmt("%.1f km / %.1f km = %.3f, runtime %.2f s", dc, nd, ratio, elapsed));
}

void throughput_criterion()
{
    auto const out = work / "keyrate";
    int const rc = run(std::string(MFQKD_CLI) + " keyrate --distance 30 --out '" + out.string() + "' > /dev/null");
    if (rc != 0 || !fs::exists(out / "keyrate.json"))
    {
        report(3, "throughput at 30 km", false, fmt("keyrate exited with %d", rc));
        return;
    }
    auto const j = nlohmann::json::parse(slurp(out / "keyrate.json"));
    double const raw = j["bits_per_sec_raw"].get<double>();
    double const sifted = j["bits_per_sec"].get<double>();
    report(3, "bits/s at 30 km >= 1e4 (R f or R f pA_z pB_z)", std::max(raw, sifted) >= 1e4,
           fmt("R f = %.3g bit/s, R f pA_z pB_z = %.3g bit/s", raw, sifted));
}

void encoding_criterion()
{
    auto const t0 = Clock::now();
    ScenarioResult const r = run_scenario(ScenarioConfig{});
    double const elapsed = seconds_since(t0);

    // (a) commanded bins only, >= 10 dB over every other bin after the preamble.
    double lit_min = INFINITY, dark_max = 0.0;
    for (std::size_t b = r.drive.preamble_bins; b < r.filtered_bin_energies.size(); ++b)
    {
        if (r.designated[b])
            lit_min = std::min(lit_min, r.filtered_bin_energies[b]);
        else
            dark_max = std::max(dark_max, r.filtered_bin_energies[b]);
    }
    double const ext = 10.0 * std::log10(lit_min / dark_max);
    bool const a = ext >= 10.0 && r.decoded_matches(ScenarioConfig{}.sequence);

    // (b) X0 slots: constructive central bin above destructive, visibility >= 0.9.
    auto const cons = bin_energies(r.interference.constructive, 800e-12);
    auto const dest = bin_energies(r.interference.destructive, 800e-12);
    bool b = true;
    double vmin = 1.0;
    for (std::size_t k = 0; k < r.metrics.size(); ++k)
        if (r.metrics[k].symbol == StateSymbol::X0)
        {
            std::size_t const central = r.drive.preamble_bins + 4 * k + 1;
            b = b && cons[central] > dest[central] && r.metrics[k].visibility >= 0.9;
            vmin = std::min(vmin, r.metrics[k].visibility);
        }

    // (c) free-running slave spikes (bins without injection) versus injected pulses.
    auto const& ps = r.slave_power.samples;
    std::size_t const nb = r.drive.samples_per_bin;
    double free_peak = 0.0, locked_peak = 0.0;
    for (std::size_t bin = r.drive.preamble_bins; bin < r.designated.size(); ++bin)
    {
        auto const lo = ps.begin() + static_cast<std::ptrdiff_t>(bin * nb);
        double const peak = *std::max_element(lo, lo + static_cast<std::ptrdiff_t>(nb));
        double& slot = r.designated[bin] ? locked_peak : free_peak;
        slot = std::max(slot, peak);
    }
    bool const c = free_peak > locked_peak;

    report(4, "encoding properties of the reference sequence, < 60 s", a && b && c && elapsed < 60.0,
           fmt("(a) extinction %.2f dB; (b) min X0 visibility %.4f; (c) free spike %.2f mW vs locked %.2f mW; "
               "runtime %.2f s",
               ext, vmin, free_peak * 1e3, locked_peak * 1e3, elapsed));
}

void bound_validity_criterion()
{
    DecoyIntensities const d;
    NoDecoyIntensities const nd;
    ChannelParams ch;
    int violations = 0, checks = 0;
    double tail = std::max({oracle::poisson_tail(d.mu0), oracle::poisson_tail(d.nu0), oracle::poisson_tail(nd.nu)});
    for (int L = 0; L <= 150; L += 10)
    {
        ch.distance = L;
        auto const c = oracle::channel_of(ch);
        for (auto const& set :
             {std::array<double, 3>{d.mu0, d.mu1, d.mu2}, std::array<double, 3>{d.nu0, d.nu1, d.nu2}})
        {
            std::array<GainError, 3> g;
            for (int i = 0; i < 3; ++i)
            {
                auto const s = oracle::series_gain(c, set[i]);
                g[i] = {s.q, s.e};
            }
            auto const b = decoy_bounds(g, set);
            violations += b.y1_low > c.yield(1);
            violations += b.e1_up && *b.e1_up < c.error(1);
            checks += 2;
        }
        auto const sz = oracle::series_gain(c, nd.mu), sx = oracle::series_gain(c, nd.nu);
        auto const b = no_decoy_bounds({sz.q, sz.e}, {sx.q, sx.e}, nd.mu, nd.nu);
        double const q01 = oracle::poisson(nd.mu, 0) * c.yield(0) + oracle::poisson(nd.mu, 1) * c.yield(1);
        violations += b.q_low > q01;
        ++checks;
    }
    report(5, "bound validity on the honest channel, L = 0..150 km", violations == 0 && tail < 1e-15,
           fmt("%d violations in %d checks, Poisson tail %.1e", violations, checks, tail));
}

void oracle_criterion()
{
    double ss_err = 0.0;
    for (auto const& p : {LaserParams::reference_slave(), LaserParams::reference_master()})
    {
        double const current = 2.0 * p.threshold_current();
        PumpWaveform w{0.1e-12, std::vector<double>(200000, current)};
        auto const tr = integrate_free(p, w, {p.n_tr, 1.0, 0.0}, 0.1e-12);
        auto const o = oracle::steady_state(p, current);
        ss_err = std::max({ss_err, std::abs(tr.n_series.back() - o.n) / o.n, std::abs(tr.q_series.back() - o.q) / o.q});
    }

    double fl_err = 0.0;
    for (auto [w, t] : {std::pair{0.05, 0.05}, {0.01, 0.02}, {0.1, 0.03}, {0.02, 0.15}})
        fl_err = std::max(fl_err, std::abs(fl_reduction(w, t).r - oracle::fl_dense(w, t).r));

    double h_err = 0.0;
    for (double p : {0.11, 1e-6, 0.015, 0.25, 0.5, 0.93})
        h_err = std::max(h_err, std::abs(binary_entropy(p) - oracle::entropy_mp(p)));

    FilterSpec const spec;
    std::size_t const n = 1 << 14;
    double const dt = 0.1e-12;
    double const df = 1.0 / (static_cast<double>(n) * dt);
    double bw_err = 0.0;
    for (double target : {spec.center_offset, spec.center_offset + spec.half_width,
                          spec.center_offset + 2.0 * spec.half_width, spec.center_offset - 1.3 * spec.half_width})
    {
        double const f = std::round(target / df) * df;
        ComplexFieldTrace tone{dt, {}};
        for (std::size_t i = 0; i < n; ++i)
            tone.samples.push_back(std::polar(1.0, 2.0 * kPi * f * static_cast<double>(i) * dt));
        auto const out = butterworth_filter(tone, spec);
        double const expect = 1.0 / std::sqrt(1.0 + std::pow((f - spec.center_offset) / spec.half_width, 4));
        for (std::size_t i = 0; i < n; i += 257)
            bw_err = std::max(bw_err, std::abs(std::abs(out.samples[i]) - expect) / expect);
    }
    bool const ok = ss_err < 1e-3 && fl_err < 1e-4 && h_err < 1e-12 && bw_err < 1e-4;
    report(6, "oracle equivalences", ok,
           fmt("steady state rel %.1e; r vs dense grid abs %.1e; entropy abs %.1e; Butterworth rel %.1e", ss_err,
               fl_err, h_err, bw_err));
}

void montecarlo_criterion()
{
    auto const t0 = Clock::now();
    double worst = 0.0;
    for (double L : {0.0, 10.0, 20.0, 30.0})
    {
        TrialConfig cfg;
        cfg.n_pulses = 1000000;
        cfg.seed = 42;
        cfg.channel.distance = L;
        auto const t = run_protocol(cfg, 8);
        auto const z = channel_model(cfg.source.mu, cfg.channel);
        auto const x = channel_model(cfg.source.nu, cfg.channel);
        auto zs = [](std::uint64_t k, std::uint64_t n, double p) {
            return std::abs(static_cast<double>(k) / static_cast<double>(n) - p)
                   / std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        };
        worst = std::max({worst, zs(t.z.detected, t.z.matched, z.q), zs(t.z.errors, t.z.detected, z.e),
                          zs(t.x.detected, t.x.matched, x.q), zs(t.x.errors, t.x.detected, x.e)});
    }
    bool same = true;
    for (double L : {0.0, 30.0})
    {
        std::string const base = std::string(MFQKD_CLI) + " montecarlo --pulses 1000000 --seed 42 --distance "
                                 + std::to_string(L);
        auto const a = work / "mc1", b = work / "mc8";
        run(base + " -j 1 --out '" + a.string() + "' > /dev/null");
        run(base + " -j 8 --out '" + b.string() + "' > /dev/null");
        for (auto name : {"tally.json", "keyrate_empirical.json"})
        {
            auto const sa = slurp(a / name);
            same = same && !sa.empty() && sa == slurp(b / name);
        }
    }
    double const elapsed = seconds_since(t0);
    report(7, "Monte Carlo within 4 sigma, identical under parallelism, < 30 s", worst < 4.0 && same && elapsed < 30.0,
           fmt("worst deviation %.2f sigma; outputs %s for 1 vs 8 workers; runtime %.2f s", worst,
               same ? "byte-identical" : "DIFFER", elapsed));
}

void invariant_criterion()
{
    auto const log = work / "invariants.txt";
    int const rc = run(std::string(MFQKD_UNIT_TESTS) + " '--test-suite=*invariants' > '" + log.string() + "' 2>&1");
    std::string summary;
    std::istringstream in(slurp(log));
    for (std::string line; std::getline(in, line);)
        if (line.find("test cases:") != std::string::npos)
            summary = line.substr(line.find("test cases:"));
    report(8, "module invariant suites", rc == 0, summary.empty() ? fmt("exit %d", rc) : summary);
}

}  // namespace

int main()
{
    fs::remove_all(work);
    fs::create_directories(work);
    scan_criteria();
    throughput_criterion();
    encoding_criterion();
    bound_validity_criterion();
    oracle_criterion();
    montecarlo_criterion();
    invariant_criterion();
    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
