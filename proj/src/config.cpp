#include "mfqkd/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

namespace mfqkd
{
namespace
{

using nlohmann::json;

double number(json const& v, std::string const& key)
{
    if (!v.is_number())
        throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

std::uint64_t count(json const& v, std::string const& key)
{
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

// Raw values that need other keys (laser params) before they can be resolved.
struct Pending
{
    std::optional<double> master_bias_ma, master_pulse_ma, slave_bias_ma, slave_pulse_ma;
    std::optional<std::uint64_t> random_length;
    std::uint64_t sequence_seed = 1;
    bool explicit_sequence = false;
};

std::map<std::string, std::function<void(RunConfig&, Pending&, json const&, std::string const&)>> const& table()
{
    using Fn = std::function<void(RunConfig&, Pending&, json const&, std::string const&)>;
    auto both = [](auto member, double scale) -> Fn {
        return [member, scale](RunConfig& c, Pending&, json const& v, std::string const& k) {
            double const x = number(v, k) * scale;
            c.scenario.master.*member = x;
            c.scenario.slave.*member = x;
        };
    };
    auto field = [](auto setter) -> Fn {
        return [setter](RunConfig& c, Pending&, json const& v, std::string const& k) { setter(c, number(v, k)); };
    };
    static std::map<std::string, Fn> const t = {
        // Channel, source and protocol.
        {"xi_db_per_km", field([](RunConfig& c, double x) { c.channel.xi = x; })},
        {"p_dc", field([](RunConfig& c, double x) { c.channel.p_dc = x; })},
        {"eta_det", field([](RunConfig& c, double x) { c.channel.eta_det = x; })},
        {"e_d", field([](RunConfig& c, double x) { c.channel.e_d = x; })},
        {"f_ec", field([](RunConfig& c, double x) { c.protocol.f_ec = x; })},
        {"pA_z",
         field([](RunConfig& c, double x) {
             c.protocol.pA_z = x;
             c.protocol.pA_x = 1.0 - x;
         })},
        {"pB_z",
         field([](RunConfig& c, double x) {
             c.protocol.pB_z = x;
             c.protocol.pB_x = 1.0 - x;
         })},
        {"f_prep_hz", field([](RunConfig& c, double x) { c.protocol.f_prep = x; })},
        {"mode",
         [](RunConfig& c, Pending&, json const& v, std::string const&) {
             if (v == "no_decoy")
                 c.mode = SourceMode::no_decoy;
             else if (v == "decoy")
                 c.mode = SourceMode::decoy;
             else
                 throw ConfigError("config key 'mode' must be \"no_decoy\" or \"decoy\"");
         }},
        {"mu", field([](RunConfig& c, double x) { c.no_decoy.mu = x; })},
        {"nu", field([](RunConfig& c, double x) { c.no_decoy.nu = x; })},
        {"mu0", field([](RunConfig& c, double x) { c.decoy.mu0 = x; })},
        {"mu1", field([](RunConfig& c, double x) { c.decoy.mu1 = x; })},
        {"mu2", field([](RunConfig& c, double x) { c.decoy.mu2 = x; })},
        {"nu0", field([](RunConfig& c, double x) { c.decoy.nu0 = x; })},
        {"nu1", field([](RunConfig& c, double x) { c.decoy.nu1 = x; })},
        {"nu2", field([](RunConfig& c, double x) { c.decoy.nu2 = x; })},
        {"distance_km", field([](RunConfig& c, double x) { c.distance_km = x; })},
        // Lasers (shared by master and slave except the compression factors).
        {"tau_ph_s", both(&LaserParams::tau_ph, 1.0)},
        {"tau_e_s", both(&LaserParams::tau_e, 1.0)},
        {"eta", both(&LaserParams::eta, 1.0)},
        {"n_th", both(&LaserParams::n_th, 1.0)},
        {"n_tr", both(&LaserParams::n_tr, 1.0)},
        {"photon_energy_ev", both(&LaserParams::photon_energy, kElectronCharge)},
        {"c_sp", both(&LaserParams::c_sp, 1.0)},
        {"gamma_conf", both(&LaserParams::gamma_conf, 1.0)},
        {"alpha", both(&LaserParams::alpha, 1.0)},
        {"gamma_p_per_w", field([](RunConfig& c, double x) { c.scenario.slave.gamma_p = x; })},
        {"gamma_p_master_per_w", field([](RunConfig& c, double x) { c.scenario.master.gamma_p = x; })},
        {"kappa_inj_per_s", field([](RunConfig& c, double x) { c.scenario.injection.kappa_inj = x; })},
        {"delta_omega_rad_s", field([](RunConfig& c, double x) { c.scenario.injection.delta_omega = x; })},
        // Encoding and drive.
        {"t_bin_ps", field([](RunConfig& c, double x) { c.scenario.timing.bin_period = x * 1e-12; })},
        {"state_gap_ps", field([](RunConfig& c, double x) { c.scenario.timing.state_gap = x * 1e-12; })},
        {"master_lead_ps", field([](RunConfig& c, double x) { c.scenario.timing.master_lead = x * 1e-12; })},
        {"slave_pulse_width_ps",
         field([](RunConfig& c, double x) { c.scenario.timing.slave_pulse_width = x * 1e-12; })},
        {"master_short_width_ps",
         field([](RunConfig& c, double x) { c.scenario.timing.master_short_width = x * 1e-12; })},
        {"master_long_width_ps",
         field([](RunConfig& c, double x) { c.scenario.timing.master_long_width = x * 1e-12; })},
        {"master_bias_ma",
         [](RunConfig&, Pending& p, json const& v, std::string const& k) { p.master_bias_ma = number(v, k); }},
        {"master_pulse_ma",
         [](RunConfig&, Pending& p, json const& v, std::string const& k) { p.master_pulse_ma = number(v, k); }},
        {"slave_bias_ma",
         [](RunConfig&, Pending& p, json const& v, std::string const& k) { p.slave_bias_ma = number(v, k); }},
        {"slave_pulse_ma",
         [](RunConfig&, Pending& p, json const& v, std::string const& k) { p.slave_pulse_ma = number(v, k); }},
        {"sequence",
         [](RunConfig& c, Pending& p, json const& v, std::string const&) {
             if (!v.is_array())
                 throw ConfigError("config key 'sequence' must be an array of \"Z0\"/\"Z1\"/\"X0\"");
             c.scenario.sequence.clear();
             for (auto const& s : v)
             {
                 if (!s.is_string())
                     throw ConfigError("config key 'sequence' must contain only strings");
                 try
                 {
                     c.scenario.sequence.push_back(parse_symbol(s.get<std::string>()));
                 }
                 catch (std::invalid_argument const& e)
                 {
                     throw ConfigError(e.what());
                 }
             }
             p.explicit_sequence = true;
         }},
        {"random_sequence_length",
         [](RunConfig&, Pending& p, json const& v, std::string const& k) { p.random_length = count(v, k); }},
        {"sequence_seed",
         [](RunConfig&, Pending& p, json const& v, std::string const& k) { p.sequence_seed = count(v, k); }},
        // Optics.
        {"filter_center_ghz", field([](RunConfig& c, double x) { c.scenario.filter.center_offset = x * 1e9; })},
        {"filter_halfwidth_ghz", field([](RunConfig& c, double x) { c.scenario.filter.half_width = x * 1e9; })},
        {"filter_order",
         [](RunConfig& c, Pending&, json const& v, std::string const& k) {
             c.scenario.filter.order = static_cast<int>(std::min<std::uint64_t>(count(v, k), 64));
         }},
        {"mzi_delay_ps", field([](RunConfig& c, double x) { c.scenario.mzi_delay = x * 1e-12; })},
        {"mzi_theta_rad", field([](RunConfig& c, double x) { c.scenario.mzi_theta = x; })},
        {"attenuation_db", field([](RunConfig& c, double x) { c.scenario.attenuation_db = x; })},
        {"target_mu", field([](RunConfig& c, double x) { c.scenario.target_mu = x; })},
        {"photodiode_ghz", field([](RunConfig& c, double x) { c.scenario.photodiode_cutoff_hz = x * 1e9; })},
        {"phase_scramble_seed",
         [](RunConfig& c, Pending&, json const& v, std::string const& k) {
             c.scenario.phase_scramble_seed = count(v, k);
         }},
        // Numerics and run control.
        {"dt_ps", field([](RunConfig& c, double x) { c.scenario.dt = x * 1e-12; })},
        {"output_stride",
         [](RunConfig& c, Pending&, json const& v, std::string const& k) {
             c.scenario.output_stride = static_cast<std::size_t>(count(v, k));
         }},
        {"pre_relax_ns", field([](RunConfig& c, double x) { c.scenario.pre_relax = x * 1e-9; })},
        {"n_pulses", [](RunConfig& c, Pending&, json const& v, std::string const& k) { c.n_pulses = count(v, k); }},
        {"seed", [](RunConfig& c, Pending&, json const& v, std::string const& k) { c.seed = count(v, k); }},
        {"threads",
         [](RunConfig& c, Pending&, json const& v, std::string const& k) {
             c.threads = static_cast<unsigned>(std::clamp<std::uint64_t>(count(v, k), 1, 256));
         }},
        {"output_dir",
         [](RunConfig& c, Pending&, json const& v, std::string const&) {
             if (!v.is_string())
                 throw ConfigError("config key 'output_dir' must be a string");
             c.output_dir = v.get<std::string>();
         }},
    };
    return t;
}

template <class F>
void checked(F f)
{
    try
    {
        f();
    }
    catch (std::invalid_argument const& e)
    {
        throw ConfigError(e.what());
    }
}

}  // namespace

SourceIntensities RunConfig::source() const
{
    if (mode == SourceMode::decoy)
        return decoy;
    return no_decoy;
}

TrialConfig RunConfig::trial() const
{
    TrialConfig t;
    t.n_pulses = n_pulses;
    t.seed = seed;
    t.source = no_decoy;
    t.channel = channel;
    t.channel.distance = distance_km;
    t.protocol = protocol;
    return t;
}

std::vector<std::string> const& config_keys()
{
    static std::vector<std::string> const keys = [] {
        std::vector<std::string> k;
        for (auto const& [name, fn] : table())
            k.push_back(name);
        return k;
    }();
    return keys;
}

RunConfig parse_config(nlohmann::json const& j)
{
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    RunConfig c;
    Pending p;
    auto const& t = table();
    // Laser parameters first so drive defaults follow the threshold currents.
    for (auto const& [key, value] : j.items())
    {
        auto it = t.find(key);
        if (it == t.end())
            throw ConfigError("unknown config key '" + key + "'");
    }
    for (auto const& [key, value] : j.items())
        t.at(key)(c, p, value, key);

    checked([&] {
        c.scenario.master.validate();
        c.scenario.slave.validate();
    });
    auto levels = DriveLevels::reference(c.scenario.master.threshold_current(),
                                         c.scenario.slave.threshold_current());
    if (p.master_bias_ma)
        levels.master_bias = *p.master_bias_ma * 1e-3;
    if (p.master_pulse_ma)
        levels.master_pulse = *p.master_pulse_ma * 1e-3;
    if (p.slave_bias_ma)
        levels.slave_bias = *p.slave_bias_ma * 1e-3;
    if (p.slave_pulse_ma)
        levels.slave_pulse = *p.slave_pulse_ma * 1e-3;
    c.scenario.levels = levels;

    if (p.random_length)
    {
        if (p.explicit_sequence)
            throw ConfigError("config keys 'sequence' and 'random_sequence_length' are exclusive");
        c.scenario.sequence = random_sequence(*p.random_length, p.sequence_seed, c.protocol.pA_z);
    }

    checked([&] {
        c.scenario.validate();
        c.channel.validate();
        c.protocol.validate();
        validate_intensities(c.no_decoy);
        if (c.mode == SourceMode::decoy)
            validate_intensities(c.decoy);
        if (c.distance_km < 0.0)
            throw std::invalid_argument("distance_km must be non-negative");
    });
    return c;
}

RunConfig load_config(std::filesystem::path const& path, std::vector<std::string> const& overrides)
{
    json j = json::object();
    if (!path.empty())
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot read config file '" + path.string() + "'");
        try
        {
            j = json::parse(in);
        }
        catch (json::parse_error const& e)
        {
            throw ConfigError("malformed config '" + path.string() + "': " + e.what());
        }
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    for (auto const& o : overrides)
    {
        auto const eq = o.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + o + "' must have the form key=value");
        std::string const key = o.substr(0, eq);
        std::string const text = o.substr(eq + 1);
        json value;
        try
        {
            value = json::parse(text);
        }
        catch (json::parse_error const&)
        {
            value = text;
        }
        j[key] = value;
    }
    return parse_config(j);
}

}  // namespace mfqkd
