#pragma once

#include <vector>

#include "loadmix/nhpp.hpp"
#include "loadmix/numerics.hpp"
#include "loadmix/series.hpp"

namespace loadmix {

/// Battery and charger parameters for a homogeneous EV fleet.
struct BatterySpec {
    double capacity_kwh = 75.0;
    double charge_rate_kw = 11.5;
    double efficiency = 0.95;                 // in (0, 1]
    double consumption_kwh_per_100mi = 27.0;
    double target_soc_percent = 100.0;        // in (0, 100]
};

/// Miles drivable on a full battery: 100 * capacity / consumption.
double full_range_miles(const BatterySpec& battery);

/// Daily driven miles: log-normal in d, clipped at cap_miles so the implied
/// arrival state of charge stays non-negative.
struct MileageModel {
    double log_mean = 3.37;  // mean of ln(d)
    double log_sd = 0.5;     // sd of ln(d)
    double cap_miles = 100.0 * 75.0 / 27.0;
};

struct EVSession {
    double arrival_time_h = 0.0;       // in [0, 24]
    double daily_miles = 0.0;
    double soc_arrival_percent = 0.0;  // in [0, 100]
    double energy_required_kwh = 0.0;
    double charge_duration_h = 0.0;
    double power_kw = 0.0;
};

double sample_daily_miles(const MileageModel& mileage, RngStream& stream);

/// State of charge on arrival after d daily miles:
/// (1 - consumption * d / (100 * capacity)) * 100, as a percentage.
/// Throws std::domain_error if the result would be negative.
double soc_at_arrival(double miles, const BatterySpec& battery);

/// Energy drawn from the charger to reach the target state of charge:
/// (target - soc_arrival) / (efficiency * 100) * capacity.
/// Throws std::domain_error if soc_arrival exceeds the target.
double energy_required(double soc_arrival_percent, const BatterySpec& battery);

/// Charging time at constant power: energy / charge_rate.
double charge_duration(double energy_kwh, const BatterySpec& battery);

/// One charging session per arrival epoch; daily miles are drawn from an
/// independent child stream per session. Epochs must lie in [0, 24] hours.
std::vector<EVSession> build_sessions(const ArrivalRecord& arrivals,
                                      const BatterySpec& battery,
                                      const MileageModel& mileage,
                                      const RngStream& stream);

/// Aggregate charging demand over one day: each session is a rectangular
/// pulse of power_kw on [arrival, arrival + duration), truncated at the
/// 24 h horizon; each sample holds the average power over its step. The
/// step must divide 24 hours.
LoadSeries aggregate_demand(const std::vector<EVSession>& sessions, int step_minutes);

/// Energy lost to truncating charging windows at the given horizon (kWh).
double truncated_energy_kwh(const std::vector<EVSession>& sessions, double horizon_h);

}  // namespace loadmix
