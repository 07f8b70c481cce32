#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "mfqkd/encoder.hpp"
#include "mfqkd/montecarlo.hpp"
#include "mfqkd/security.hpp"

namespace mfqkd
{

class IoError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/*!
 * Write through `fill` into `<path>.tmp`, then rename over `path`. A failed or
 * interrupted write leaves no file at `path` (and removes the temporary).
 */
void write_atomic(std::filesystem::path const& path, std::function<void(std::ostream&)> const& fill);

nlohmann::json to_json(KeyRatePoint const& p);
nlohmann::json to_json(std::vector<BinMetrics> const& metrics);
nlohmann::json tally_json(TallyCounts const& t, std::uint64_t seed, std::uint64_t n_pulses);

//! Header L_km,Q_signal_Z,E_signal_Z,Q_signal_X,E_signal_X,bound_gain_low,bound_Ez_up,bound_Ex_up,r,R,bits_per_sec,status
void write_keyrate_csv(std::ostream& os, std::vector<KeyRatePoint> const& points);

}  // namespace mfqkd
