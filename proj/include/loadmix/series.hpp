#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace loadmix {

/// Uniformly sampled power series in kW.
struct LoadSeries {
    std::int64_t start_epoch_s = 0;  // seconds since 1970-01-01T00:00:00 (naive/UTC)
    int step_minutes = 15;
    std::vector<double> values_kw;
};

/// Parse "YYYY-MM-DDTHH:MM:SS" (a trailing "Z" is accepted and ignored).
/// Throws std::invalid_argument on malformed input.
std::int64_t parse_timestamp(std::string_view text);

/// Format seconds since the epoch as "YYYY-MM-DDTHH:MM:SS".
std::string format_timestamp(std::int64_t epoch_seconds);

/// Total energy of the series: sum(kW) * step in hours.
double total_energy_kwh(const LoadSeries& series);

}  // namespace loadmix
