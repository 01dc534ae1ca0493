#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "loadmix/numerics.hpp"

namespace loadmix {

enum class IntensityKind { constant, sinusoidal, piecewise_constant, tabulated };

/// Arrival-rate function lambda(t) >= 0 on [0, horizon]. Time is measured in
/// hours throughout; rates are events per hour.
///
/// Kinds:
///   constant           lambda(t) = rate
///   sinusoidal         lambda(t) = a + b * sin(c * pi * t)
///   piecewise_constant rates[i] on [breakpoints[i], breakpoints[i+1]);
///                      breakpoints at a boundary take the right-hand
///                      segment's value (half-open intervals)
///   tabulated          linear interpolation through (times[i], values[i])
struct IntensityFunction {
    IntensityKind kind = IntensityKind::constant;
    double horizon = 0.0;

    double rate = 0.0;                  // constant
    double a = 0.0, b = 0.0, c = 0.0;   // sinusoidal
    std::vector<double> breakpoints;    // piecewise_constant, size n+1
    std::vector<double> rates;          // piecewise_constant, size n
    std::vector<double> times;          // tabulated
    std::vector<double> values;         // tabulated
};

IntensityFunction make_constant_intensity(double rate, double horizon);
IntensityFunction make_sinusoidal_intensity(double a, double b, double c, double horizon);
IntensityFunction make_piecewise_intensity(std::vector<double> breakpoints,
                                           std::vector<double> rates);
IntensityFunction make_tabulated_intensity(std::vector<double> times,
                                           std::vector<double> values);

/// lambda(t). Throws std::domain_error if t is outside [0, horizon] or the
/// evaluated rate is negative.
double intensity_at(const IntensityFunction& intensity, double t);

/// Exact sup of lambda over [0, horizon], computed per kind (no sampling).
double peak_rate(const IntensityFunction& intensity);

/// Mean value function: integral of lambda over [0, t]. Closed form for
/// constant/sinusoidal/piecewise kinds; adaptive quadrature (abs tol 1e-9)
/// for tabulated ones.
double mean_value(const IntensityFunction& intensity, double t);

/// P(N(t) = k) for the counting process with the given intensity, evaluated
/// in log space.
double count_probability(const IntensityFunction& intensity, double t, int k);

nlohmann::json intensity_to_json(const IntensityFunction& intensity);
IntensityFunction intensity_from_json(const nlohmann::json& doc);

/// One simulated realization of a counting process on [0, horizon].
struct ArrivalRecord {
    std::vector<double> epochs;  // strictly increasing, all in [0, horizon]
    IntensityFunction intensity;
    std::uint64_t seed = 0;      // stream descriptor for provenance
    std::uint64_t stream = 0;
    [[nodiscard]] std::size_t count() const { return epochs.size(); }
};

/// Homogeneous Poisson process: cumulative exponential inter-arrival times
/// S_k = S_{k-1} - (1/rate) log u_k, truncated to epochs < horizon.
ArrivalRecord simulate_hpp(double rate, double horizon, RngStream& stream);

/// Acceptance-rejection thinning: keep epoch S_j iff w_j <= lambda(S_j)/rate
/// with fresh uniforms w_j. The input must come from a constant-rate process
/// dominating the target; a NumericalError is thrown if the target rate
/// exceeds the dominating rate at any evaluated epoch.
ArrivalRecord thin(const ArrivalRecord& hpp, const IntensityFunction& target,
                   RngStream& stream);

/// Thinning composition: homogeneous process at the exact peak rate, then
/// acceptance-rejection against the target. Epoch generation and thinning
/// use distinct child streams so acceptance is independent of the epochs.
ArrivalRecord simulate_nhpp(const IntensityFunction& target, const RngStream& stream);

/// Daily arrival schedule: 48 half-hour segments over [0, 24] hours, with
/// each segment's rate (events/hour) drawn uniformly from the window's
/// candidate set: {1..4} before 06:00, {5..11} on [06:00, 08:00), {1..4} on
/// [08:00, 13:00), {12..17} on [13:00, 18:00), {5..11} on [18:00, 20:00),
/// and {1..4} from 20:00 on.
IntensityFunction build_daily_arrival_schedule(RngStream& stream);

}  // namespace loadmix
