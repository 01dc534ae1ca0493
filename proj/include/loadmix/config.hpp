#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "loadmix/ev.hpp"
#include "loadmix/ggmm.hpp"
#include "loadmix/nhpp.hpp"

namespace loadmix {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything a run needs, resolved from (defaults <- config file <- CLI
/// flags). Defaults reproduce the reference scenario: the randomized daily
/// arrival schedule, a 75 kWh / 11.5 kW / 95% battery charging to 100%,
/// log-normal daily miles (3.37, 0.5), and EM with epsilon 1e-7.
struct RunConfig {
    std::uint64_t seed = 1;
    bool seed_set = false;          // true once any layer provided a seed
    bool intensity_is_daily_schedule = true;
    std::optional<IntensityFunction> intensity;  // set unless daily schedule
    BatterySpec battery;
    MileageModel mileage;
    int em_m = 0;                   // single fit order; 0 = unset
    int em_m_min = 0, em_m_max = 0; // order range; 0 = unset
    double em_epsilon = 1e-7;
    int em_max_iterations = 2000;
    int step_minutes = 15;
    int replications = 1;
    bool with_ev = false;
    bool timings = false;
    std::string out_dir = "out";
    std::string load_csv;
};

/// Parse a config JSON document over the defaults. Unknown keys are
/// rejected so typos fail loudly. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config_file(const std::string& path);

/// Environment fallback for the seed (lowest precedence after flags and
/// config): reads LOADMIX_SEED if set, else leaves the config untouched.
void apply_seed_env(RunConfig& config, const char* env_value);

/// Canonical JSON rendering of the effective configuration (sorted keys),
/// used for provenance hashing.
nlohmann::json config_to_json(const RunConfig& config);

/// FNV-1a 64-bit hash of the canonical config rendering, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace loadmix
