#include "mfqkd/io.hpp"

#include <fstream>
#include <iomanip>
#include <system_error>

namespace mfqkd
{

using nlohmann::json;

void write_atomic(std::filesystem::path const& path, std::function<void(std::ostream&)> const& fill)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open '" + tmp.string() + "' for writing");
        try
        {
            fill(out);
        }
        catch (...)
        {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw;
        }
        out.flush();
        if (!out)
        {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
    {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
    }
}

namespace
{

json gains_json(std::vector<GainError> const& g)
{
    json a = json::array();
    for (auto const& x : g)
        a.push_back({{"Q", x.q}, {"E", x.e}});
    return a;
}

}  // namespace

json to_json(KeyRatePoint const& p)
{
    json bounds = {{"gain_low", p.bounds.q_low},
                   {"Ez_up", p.bounds.e_up_z},
                   {"Ex_up", p.bounds.e_up_x},
                   {"determinate", p.bounds.determinate}};
    if (p.bounds.y0_low)
        bounds["Y0_low"] = *p.bounds.y0_low;
    return {{"L_km", p.distance},
            {"mode", p.decoy ? "decoy" : "no_decoy"},
            {"Q_signal_Z", p.signal_z.q},
            {"E_signal_Z", p.signal_z.e},
            {"Q_signal_X", p.signal_x.q},
            {"E_signal_X", p.signal_x.e},
            {"gains_Z", gains_json(p.gains_z)},
            {"gains_X", gains_json(p.gains_x)},
            {"bounds", bounds},
            {"r", p.r_reduction},
            {"kappa", p.kappa},
            {"R", p.rate_per_pulse},
            {"bits_per_sec", p.bits_per_second},
            {"bits_per_sec_raw", p.bits_per_second_raw},
            {"status", std::string(to_string(p.status))}};
}

json to_json(std::vector<BinMetrics> const& metrics)
{
    json a = json::array();
    for (auto const& m : metrics)
        a.push_back({{"symbol", std::string(to_string(m.symbol))},
                     {"bin0_energy_J", m.bin0_energy},
                     {"bin1_energy_J", m.bin1_energy},
                     {"mu_hat", m.mu_hat},
                     {"extinction_db", m.extinction_db},
                     {"visibility", m.visibility}});
    return a;
}

json tally_json(TallyCounts const& t, std::uint64_t seed, std::uint64_t n_pulses)
{
    return {{"sent", {{"z0", t.sent_z0}, {"z1", t.sent_z1}, {"x0", t.sent_x0}}},
            {"matched", {{"z", t.z.matched}, {"x", t.x.matched}}},
            {"sifted", {{"z", t.z.detected}, {"x", t.x.detected}}},
            {"errors", {{"z", t.z.errors}, {"x", t.x.errors}}},
            {"q_z", t.q_z().value},
            {"e_z", t.e_z().value},
            {"q_x", t.q_x().value},
            {"e_x", t.e_x().value},
            {"stderr",
             {{"q_z", t.q_z().std_error},
              {"e_z", t.e_z().std_error},
              {"q_x", t.q_x().std_error},
              {"e_x", t.e_x().std_error}}},
            {"seed", seed},
            {"n_pulses", n_pulses}};
}

void write_keyrate_csv(std::ostream& os, std::vector<KeyRatePoint> const& points)
{
    os << "L_km,Q_signal_Z,E_signal_Z,Q_signal_X,E_signal_X,bound_gain_low,bound_Ez_up,bound_Ex_up,r,R,"
          "bits_per_sec,status\n";
    os << std::setprecision(12);
    for (auto const& p : points)
        os << p.distance << ',' << p.signal_z.q << ',' << p.signal_z.e << ',' << p.signal_x.q << ','
           << p.signal_x.e << ',' << p.bounds.q_low << ',' << p.bounds.e_up_z << ',' << p.bounds.e_up_x << ','
           << p.r_reduction << ',' << p.rate_per_pulse << ',' << p.bits_per_second << ','
           << to_string(p.status) << '\n';
}

}  // namespace mfqkd
