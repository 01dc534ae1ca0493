#include "loadmix/ev.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace loadmix {

double full_range_miles(const BatterySpec& battery) {
    return 100.0 * battery.capacity_kwh / battery.consumption_kwh_per_100mi;
}

double sample_daily_miles(const MileageModel& mileage, RngStream& stream) {
    const double miles = std::exp(mileage.log_mean + mileage.log_sd * stream.normal());
    return std::min(miles, mileage.cap_miles);
}

double soc_at_arrival(double miles, const BatterySpec& battery) {
    const double soc =
        (1.0 - battery.consumption_kwh_per_100mi * miles / (100.0 * battery.capacity_kwh)) *
        100.0;
    if (soc < 0.0)
        throw std::domain_error("soc_at_arrival: miles exceed the battery range");
    return soc;
}

double energy_required(double soc_arrival_percent, const BatterySpec& battery) {
    if (soc_arrival_percent > battery.target_soc_percent)
        throw std::domain_error("energy_required: arrival SoC above the target");
    return (battery.target_soc_percent - soc_arrival_percent) /
           (battery.efficiency * 100.0) * battery.capacity_kwh;
}

double charge_duration(double energy_kwh, const BatterySpec& battery) {
    if (energy_kwh < 0.0)
        throw std::domain_error("charge_duration: energy must be >= 0");
    return energy_kwh / battery.charge_rate_kw;
}

std::vector<EVSession> build_sessions(const ArrivalRecord& arrivals,
                                      const BatterySpec& battery,
                                      const MileageModel& mileage,
                                      const RngStream& stream) {
    std::vector<EVSession> sessions;
    sessions.reserve(arrivals.epochs.size());
    for (std::size_t i = 0; i < arrivals.epochs.size(); ++i) {
        const double arrival = arrivals.epochs[i];
        if (arrival < 0.0 || arrival > 24.0)
            throw std::domain_error("build_sessions: arrival epoch outside [0, 24] h");
        RngStream session_stream = stream.child(i);
        EVSession session;
        session.arrival_time_h = arrival;
        session.daily_miles = sample_daily_miles(mileage, session_stream);
        session.soc_arrival_percent = soc_at_arrival(session.daily_miles, battery);
        session.energy_required_kwh =
            energy_required(session.soc_arrival_percent, battery);
        session.charge_duration_h = charge_duration(session.energy_required_kwh, battery);
        session.power_kw = battery.charge_rate_kw;
        sessions.push_back(session);
    }
    return sessions;
}

LoadSeries aggregate_demand(const std::vector<EVSession>& sessions, int step_minutes) {
    if (step_minutes <= 0 || (24 * 60) % step_minutes != 0)
        throw std::invalid_argument("aggregate_demand: step must divide 24 h");
    LoadSeries series;
    series.start_epoch_s = 0;
    series.step_minutes = step_minutes;
    series.values_kw.assign(static_cast<std::size_t>(24 * 60 / step_minutes), 0.0);
    const double step_h = step_minutes / 60.0;
    for (const EVSession& session : sessions) {
        const double begin = session.arrival_time_h;
        const double end = std::min(begin + session.charge_duration_h, 24.0);
        if (end <= begin) continue;
        const std::size_t first = static_cast<std::size_t>(begin / step_h);
        for (std::size_t bin = first; bin < series.values_kw.size(); ++bin) {
            const double bin_start = bin * step_h;
            if (bin_start >= end) break;
            const double overlap =
                std::min(end, bin_start + step_h) - std::max(begin, bin_start);
            if (overlap > 0.0)
                series.values_kw[bin] += session.power_kw * overlap / step_h;
        }
    }
    return series;
}

double truncated_energy_kwh(const std::vector<EVSession>& sessions, double horizon_h) {
    double lost = 0.0;
    for (const EVSession& session : sessions) {
        const double past_end =
            session.arrival_time_h + session.charge_duration_h - horizon_h;
        if (past_end > 0.0) lost += session.power_kw * past_end;
    }
    return lost;
}

}  // namespace loadmix
