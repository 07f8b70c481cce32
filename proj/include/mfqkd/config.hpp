#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mfqkd/montecarlo.hpp"
#include "mfqkd/scenario.hpp"
#include "mfqkd/security.hpp"

namespace mfqkd
{

//! Malformed, unknown or out-of-range configuration.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum class SourceMode
{
    no_decoy,
    decoy
};

/*!
 * Complete run configuration. Defaults reproduce the reference laser and
 * QKD system parameters, so an empty JSON object is a valid config.
 */
struct RunConfig
{
    ScenarioConfig scenario;
    ChannelParams channel;
    ProtocolConfig protocol;
    SourceMode mode = SourceMode::no_decoy;
    NoDecoyIntensities no_decoy;
    DecoyIntensities decoy;
    double distance_km = 10.0;
    std::uint64_t n_pulses = 1000000;
    std::uint64_t seed = 42;
    unsigned threads = 1;
    std::filesystem::path output_dir = ".";

    SourceIntensities source() const;
    TrialConfig trial() const;
};

//! Every key accepted in a config object.
std::vector<std::string> const& config_keys();

//! Strict parse: unknown keys, wrong types and invariant violations throw ConfigError.
RunConfig parse_config(nlohmann::json const& j);

//! Load `path` (empty path means defaults only) and apply `key=value` overrides.
RunConfig load_config(std::filesystem::path const& path, std::vector<std::string> const& overrides);

}  // namespace mfqkd
