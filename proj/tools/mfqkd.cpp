// mfqkd: three-state time-bin QKD transmitter simulation and key-rate tool.
//
//   mfqkd simulate   [--config f.json] [--set key=value ...] [--out dir]
//   mfqkd keyrate    [--distance km]
//   mfqkd scan       [--from km --to km --step km]
//   mfqkd montecarlo [--pulses N --seed S --distance km]
//
// Exit codes: 0 success, 1 result flagged (insecure, undecodable, too few
// counts), 2 configuration or I/O error.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mfqkd/config.hpp"
#include "mfqkd/io.hpp"
#include "mfqkd/montecarlo.hpp"
#include "mfqkd/scenario.hpp"
#include "mfqkd/security.hpp"

namespace fs = std::filesystem;
using namespace mfqkd;

namespace
{

constexpr int kOk = 0;
constexpr int kFlagged = 1;
constexpr int kConfigError = 2;

struct Common
{
    std::string config;
    std::vector<std::string> set;
    std::string out;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("-c,--config", c.config, "JSON config file (defaults apply when omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", c.set, "Override a config key, e.g. --set distance_km=25 (repeatable)");
    cmd->add_option("-o,--out", c.out, "Output directory")->envname("MFQKD_OUTPUT_DIR");
    cmd->add_option("-j,--threads", c.threads, "Worker threads")->check(CLI::Range(1u, 256u));
}

RunConfig load(Common const& c)
{
    RunConfig cfg = load_config(c.config, c.set);
    if (!c.out.empty())
        cfg.output_dir = c.out;
    if (c.threads)
        cfg.threads = *c.threads;
    return cfg;
}

fs::path prepare_dir(RunConfig const& cfg)
{
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec || !fs::is_directory(cfg.output_dir))
        throw IoError("cannot create output directory '" + cfg.output_dir.string() + "'");
    return cfg.output_dir;
}

void emit_json(fs::path const& path, nlohmann::json const& j)
{
    write_atomic(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    std::cout << "wrote " << path.string() << '\n';
}

int cmd_simulate(Common const& common)
{
    RunConfig const cfg = load(common);
    ScenarioResult const res = run_scenario(cfg.scenario);
    fs::path const dir = prepare_dir(cfg);

    auto const trace = dir / "scenario_trace.csv";
    write_atomic(trace, [&](std::ostream& os) { write_scenario_csv(os, res); });
    std::cout << "wrote " << trace.string() << '\n';

    nlohmann::json bins = {{"theta_rad", res.theta},
                           {"attenuation_db", res.attenuation_db},
                           {"bins", to_json(res.metrics)}};
    emit_json(dir / "bin_metrics.json", bins);

    std::printf("%-5s %-6s %14s %14s %10s %12s %10s\n", "slot", "state", "bin0_J", "bin1_J", "mu_hat",
                "extinct_dB", "visib");
    for (std::size_t i = 0; i < res.metrics.size() && i < 40; ++i)
    {
        auto const& m = res.metrics[i];
        std::printf("%-5zu %-6s %14.6e %14.6e %10.5f %12.2f %10.4f\n", i, std::string(to_string(m.symbol)).c_str(),
                    m.bin0_energy, m.bin1_energy, m.mu_hat, m.extinction_db, m.visibility);
    }
    if (res.metrics.size() > 40)
        std::printf("... %zu slots total\n", res.metrics.size());

    if (!res.decoded_matches(cfg.scenario.sequence))
    {
        std::size_t bad = 0;
        for (std::size_t i = 0; i < res.decoded.size(); ++i)
            if (!res.decoded[i] || *res.decoded[i] != cfg.scenario.sequence[i])
                ++bad;
        std::cerr << "error: " << bad << " slot(s) do not decode to the commanded symbol\n";
        return kFlagged;
    }
    return kOk;
}

void print_point(KeyRatePoint const& p)
{
    std::printf("L = %.3f km (%s)\n", p.distance, p.decoy ? "decoy" : "no decoy");
    std::printf("  Q_Z = %.6e  E_Z = %.6e  Q_X = %.6e  E_X = %.6e\n", p.signal_z.q, p.signal_z.e, p.signal_x.q,
                p.signal_x.e);
    std::printf("  bounds: gain_low = %.6e  Ez_up = %.6e  Ex_up = %.6e\n", p.bounds.q_low, p.bounds.e_up_z,
                p.bounds.e_up_x);
    std::printf("  r = %.6f  R = %.6e  bits/s = %.6e (R f = %.6e)  status = %s\n", p.r_reduction, p.rate_per_pulse,
                p.bits_per_second, p.bits_per_second_raw, std::string(to_string(p.status)).c_str());
}

int cmd_keyrate(Common const& common, std::optional<double> distance)
{
    RunConfig cfg = load(common);
    if (distance)
    {
        if (!(*distance >= 0.0))
            throw ConfigError("--distance must be non-negative");
        cfg.distance_km = *distance;
    }
    ChannelParams ch = cfg.channel;
    ch.distance = cfg.distance_km;
    KeyRatePoint const p = secret_key_rate(cfg.source(), ch, cfg.protocol);
    fs::path const dir = prepare_dir(cfg);
    emit_json(dir / "keyrate.json", to_json(p));
    print_point(p);
    if (p.status != KeyStatus::ok)
    {
        std::cerr << "warning: no secure key at " << p.distance << " km (R clamped to 0)\n";
        return kFlagged;
    }
    return kOk;
}

int cmd_scan(Common const& common, double from, double to, double step)
{
    RunConfig const cfg = load(common);
    if (!(from <= to))
        throw ConfigError("scan range is inverted: --from must not exceed --to");
    if (!(step > 0.0))
        throw ConfigError("--step must be positive");
    if (!(from >= 0.0))
        throw ConfigError("--from must be non-negative");

    unsigned const threads = cfg.threads;
    DistanceScan const nd = scan_distance(cfg.no_decoy, cfg.channel, cfg.protocol, from, to, step, threads);
    DistanceScan const dc = scan_distance(cfg.decoy, cfg.channel, cfg.protocol, from, to, step, threads);

    fs::path const dir = prepare_dir(cfg);
    for (auto const& [name, scan] : {std::pair{"keyrate_scan_no_decoy.csv", &nd}, std::pair{"keyrate_scan_decoy.csv", &dc}})
    {
        auto const path = dir / name;
        write_atomic(path, [&](std::ostream& os) { write_keyrate_csv(os, scan->points); });
        std::cout << "wrote " << path.string() << '\n';
    }

    auto dist = [](DistanceScan const& s) -> nlohmann::json {
        if (s.max_distance)
            return *s.max_distance;
        return nullptr;
    };
    nlohmann::json summary = {{"from_km", from},
                              {"to_km", to},
                              {"step_km", step},
                              {"no_decoy", {{"max_distance_km", dist(nd)}}},
                              {"decoy", {{"max_distance_km", dist(dc)}}},
                              {"ratio", nullptr}};
    bool const have_ratio = nd.max_distance && dc.max_distance && *nd.max_distance > 0.0;
    if (have_ratio)
        summary["ratio"] = *dc.max_distance / *nd.max_distance;
    emit_json(dir / "scan_summary.json", summary);

    auto show = [](char const* label, DistanceScan const& s) {
        if (s.max_distance)
            std::printf("%-9s max distance %.1f km\n", label, *s.max_distance);
        else
            std::printf("%-9s no secure distance in range\n", label);
    };
    show("no decoy", nd);
    show("decoy", dc);
    if (!have_ratio)
    {
        std::cerr << "warning: max-distance ratio undefined (no secure point in one mode)\n";
        return kFlagged;
    }
    std::printf("ratio    %.3f\n", summary["ratio"].get<double>());
    return kOk;
}

int cmd_montecarlo(Common const& common,
                   std::optional<std::uint64_t> pulses,
                   std::optional<std::uint64_t> seed,
                   std::optional<double> distance)
{
    RunConfig cfg = load(common);
    if (cfg.mode != SourceMode::no_decoy)
        throw ConfigError("montecarlo simulates the no-decoy source; set mode to \"no_decoy\"");
    if (pulses)
        cfg.n_pulses = *pulses;
    if (seed)
        cfg.seed = *seed;
    if (distance)
    {
        if (!(*distance >= 0.0))
            throw ConfigError("--distance must be non-negative");
        cfg.distance_km = *distance;
    }
    TrialConfig const trial = cfg.trial();
    TallyCounts const tally = run_protocol(trial, cfg.threads);
    fs::path const dir = prepare_dir(cfg);
    emit_json(dir / "tally.json", tally_json(tally, cfg.seed, cfg.n_pulses));

    GainError const az = channel_model(trial.source.mu, trial.channel);
    GainError const ax = channel_model(trial.source.nu, trial.channel);
    // Deviation in units of the binomial sigma implied by the analytic value.
    auto row = [](char const* name, std::uint64_t k, std::uint64_t n, double analytic) {
        double const est = n > 0 ? static_cast<double>(k) / static_cast<double>(n) : 0.0;
        double const sigma = n > 0 ? std::sqrt(analytic * (1.0 - analytic) / static_cast<double>(n)) : 0.0;
        double const z = sigma > 0.0 ? (est - analytic) / sigma : 0.0;
        std::printf("  %-4s %14.6e %14.6e %12.4e %8.2f\n", name, analytic, est, sigma, z);
    };
    std::printf("L = %.3f km, %llu pulses, seed %llu\n", trial.channel.distance,
                static_cast<unsigned long long>(cfg.n_pulses), static_cast<unsigned long long>(cfg.seed));
    std::printf("  %-4s %14s %14s %12s %8s\n", "", "analytic", "empirical", "sigma", "z");
    row("Q_Z", tally.z.detected, tally.z.matched, az.q);
    row("E_Z", tally.z.errors, tally.z.detected, az.e);
    row("Q_X", tally.x.detected, tally.x.matched, ax.q);
    row("E_X", tally.x.errors, tally.x.detected, ax.e);

    KeyRatePoint emp;
    try
    {
        emp = empirical_key_rate(tally, trial);
    }
    catch (InsufficientStatistics const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kFlagged;
    }
    emit_json(dir / "keyrate_empirical.json", to_json(emp));
    KeyRatePoint const ana = secret_key_rate(trial.source, trial.channel, trial.protocol);
    std::printf("  %-4s %14.6e %14.6e\n", "R", ana.rate_per_pulse, emp.rate_per_pulse);
    if (emp.status != KeyStatus::ok)
    {
        std::cerr << "warning: empirical key rate clamped to 0\n";
        return kFlagged;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Three-state time-bin QKD: transmitter simulation, key rates and protocol Monte Carlo"};
    app.require_subcommand(1);

    Common common;
    auto* sim = app.add_subcommand("simulate", "Simulate the master/slave transmitter on a symbol sequence");
    add_common(sim, common);

    std::optional<double> distance;
    auto* key = app.add_subcommand("keyrate", "Secret key rate at one distance");
    add_common(key, common);
    key->add_option("-d,--distance", distance, "Fiber length, km (overrides distance_km)");

    double from = 0.0, to = 200.0, step = 1.0;
    auto* scan = app.add_subcommand("scan", "Key rate versus distance for both source modes");
    add_common(scan, common);
    scan->add_option("--from", from, "First distance, km")->capture_default_str();
    scan->add_option("--to", to, "Last distance, km")->capture_default_str();
    scan->add_option("--step", step, "Grid step, km")->capture_default_str();

    std::optional<std::uint64_t> pulses, seed;
    auto* mc = app.add_subcommand("montecarlo", "Bit-level protocol simulation on the honest channel");
    add_common(mc, common);
    mc->add_option("-n,--pulses", pulses, "Number of pulses (overrides n_pulses)");
    mc->add_option("--seed", seed, "RNG seed (overrides seed)");
    mc->add_option("-d,--distance", distance, "Fiber length, km (overrides distance_km)");

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try
    {
        if (sim->parsed())
            return cmd_simulate(common);
        if (key->parsed())
            return cmd_keyrate(common, distance);
        if (scan->parsed())
            return cmd_scan(common, from, to, step);
        return cmd_montecarlo(common, pulses, seed, distance);
    }
    catch (ConfigError const& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    catch (IoError const& e)
    {
        std::cerr << "io error: " << e.what() << '\n';
        return kConfigError;
    }
    catch (std::invalid_argument const& e)
    {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfigError;
    }
    catch (IntegrationError const& e)
    {
        std::cerr << "integration failed: " << e.what() << '\n';
        return kFlagged;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kFlagged;
    }
}
