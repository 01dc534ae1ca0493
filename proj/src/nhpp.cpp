#include "loadmix/nhpp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace loadmix {

namespace {

void require(bool condition, const char* message) {
    if (!condition) throw std::invalid_argument(message);
}

double piecewise_value(const std::vector<double>& breakpoints,
                       const std::vector<double>& values, double t) {
    // Half-open segments [b_i, b_{i+1}); the final point maps to the last
    // segment so the horizon endpoint stays evaluable.
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - breakpoints.begin());
    if (idx == 0) idx = 1;  // t == breakpoints.front()
    if (idx > values.size()) idx = values.size();
    return values[idx - 1];
}

double tabulated_value(const std::vector<double>& times,
                       const std::vector<double>& values, double t) {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return values.front();
    if (it == times.end()) return values.back();
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return values[lo] + w * (values[hi] - values[lo]);
}

}  // namespace

IntensityFunction make_constant_intensity(double rate, double horizon) {
    require(rate >= 0.0, "intensity: constant rate must be >= 0");
    require(horizon >= 0.0, "intensity: horizon must be >= 0");
    IntensityFunction f;
    f.kind = IntensityKind::constant;
    f.horizon = horizon;
    f.rate = rate;
    return f;
}

IntensityFunction make_sinusoidal_intensity(double a, double b, double c, double horizon) {
    require(horizon >= 0.0, "intensity: horizon must be >= 0");
    IntensityFunction f;
    f.kind = IntensityKind::sinusoidal;
    f.horizon = horizon;
    f.a = a;
    f.b = b;
    f.c = c;
    return f;
}

IntensityFunction make_piecewise_intensity(std::vector<double> breakpoints,
                                           std::vector<double> rates) {
    require(breakpoints.size() >= 2, "intensity: need at least one segment");
    require(rates.size() + 1 == breakpoints.size(),
            "intensity: need one rate per segment");
    require(breakpoints.front() == 0.0, "intensity: breakpoints must start at 0");
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
        require(breakpoints[i] > breakpoints[i - 1],
                "intensity: breakpoints must be strictly increasing");
    for (double r : rates) require(r >= 0.0, "intensity: rates must be >= 0");
    IntensityFunction f;
    f.kind = IntensityKind::piecewise_constant;
    f.horizon = breakpoints.back();
    f.breakpoints = std::move(breakpoints);
    f.rates = std::move(rates);
    return f;
}

IntensityFunction make_tabulated_intensity(std::vector<double> times,
                                           std::vector<double> values) {
    require(times.size() >= 2, "intensity: need at least two table points");
    require(times.size() == values.size(), "intensity: times/values size mismatch");
    require(times.front() == 0.0, "intensity: table must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "intensity: times must be strictly increasing");
    for (double v : values) require(v >= 0.0, "intensity: values must be >= 0");
    IntensityFunction f;
    f.kind = IntensityKind::tabulated;
    f.horizon = times.back();
    f.times = std::move(times);
    f.values = std::move(values);
    return f;
}

double intensity_at(const IntensityFunction& intensity, double t) {
    if (t < 0.0 || t > intensity.horizon)
        throw std::domain_error("intensity: t outside [0, horizon]");
    double value = 0.0;
    switch (intensity.kind) {
        case IntensityKind::constant:
            value = intensity.rate;
            break;
        case IntensityKind::sinusoidal:
            value = intensity.a +
                    intensity.b * std::sin(intensity.c * std::numbers::pi * t);
            break;
        case IntensityKind::piecewise_constant:
            value = piecewise_value(intensity.breakpoints, intensity.rates, t);
            break;
        case IntensityKind::tabulated:
            value = tabulated_value(intensity.times, intensity.values, t);
            break;
    }
    if (value < 0.0)
        throw std::domain_error("intensity: negative rate at t=" + std::to_string(t));
    return value;
}

double peak_rate(const IntensityFunction& intensity) {
    switch (intensity.kind) {
        case IntensityKind::constant:
            return intensity.rate;
        case IntensityKind::sinusoidal: {
            // Candidates: both endpoints and every interior extremum. The
            // extrema sit at t_k = (0.5 + k) / |c| where sin(c pi t_k) is
            // exactly (+-1)^k (times the sign of c), so they are evaluated
            // analytically rather than through sin().
            double best = std::max(intensity_at(intensity, 0.0),
                                   intensity_at(intensity, intensity.horizon));
            if (intensity.c != 0.0) {
                const double sigma = intensity.c > 0.0 ? 1.0 : -1.0;
                for (int k = 0;; ++k) {
                    const double t = (0.5 + k) / std::abs(intensity.c);
                    if (t > intensity.horizon) break;
                    const double sin_value = sigma * (k % 2 == 0 ? 1.0 : -1.0);
                    best = std::max(best, intensity.a + intensity.b * sin_value);
                }
            }
            return best;
        }
        case IntensityKind::piecewise_constant:
            return *std::max_element(intensity.rates.begin(), intensity.rates.end());
        case IntensityKind::tabulated:
            // Linear interpolation attains its maximum at a node.
            return *std::max_element(intensity.values.begin(), intensity.values.end());
    }
    throw std::logic_error("intensity: unknown kind");
}

double mean_value(const IntensityFunction& intensity, double t) {
    if (t < 0.0 || t > intensity.horizon)
        throw std::domain_error("mean_value: t outside [0, horizon]");
    switch (intensity.kind) {
        case IntensityKind::constant:
            return intensity.rate * t;
        case IntensityKind::sinusoidal: {
            // integral of a + b sin(c pi y) = a t + (b / (c pi))(1 - cos(c pi t))
            if (intensity.c == 0.0) return intensity.a * t;
            const double cpi = intensity.c * std::numbers::pi;
            return intensity.a * t + intensity.b / cpi * (1.0 - std::cos(cpi * t));
        }
        case IntensityKind::piecewise_constant: {
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < intensity.breakpoints.size(); ++i) {
                const double lo = intensity.breakpoints[i];
                if (lo >= t) break;
                const double hi = std::min(intensity.breakpoints[i + 1], t);
                acc += intensity.rates[i] * (hi - lo);
            }
            return acc;
        }
        case IntensityKind::tabulated:
            return integrate([&](double y) { return intensity_at(intensity, y); }, 0.0,
                             t, 1e-9);
    }
    throw std::logic_error("intensity: unknown kind");
}

double count_probability(const IntensityFunction& intensity, double t, int k) {
    if (k < 0) throw std::domain_error("count_probability: k must be >= 0");
    const double big_lambda = mean_value(intensity, t);
    if (big_lambda == 0.0) return k == 0 ? 1.0 : 0.0;
    // log pmf = k log(Lambda) - Lambda - log(k!)
    const double log_pmf =
        k * std::log(big_lambda) - big_lambda - log_gamma(k + 1.0);
    return std::exp(log_pmf);
}

nlohmann::json intensity_to_json(const IntensityFunction& intensity) {
    nlohmann::json params;
    const char* kind = nullptr;
    switch (intensity.kind) {
        case IntensityKind::constant:
            kind = "constant";
            params["rate"] = intensity.rate;
            break;
        case IntensityKind::sinusoidal:
            kind = "sinusoidal";
            params["a"] = intensity.a;
            params["b"] = intensity.b;
            params["c"] = intensity.c;
            break;
        case IntensityKind::piecewise_constant:
            kind = "piecewise_constant";
            params["breakpoints"] = intensity.breakpoints;
            params["rates"] = intensity.rates;
            break;
        case IntensityKind::tabulated:
            kind = "tabulated";
            params["times"] = intensity.times;
            params["values"] = intensity.values;
            break;
    }
    return nlohmann::json{{"kind", kind}, {"horizon", intensity.horizon},
                          {"params", params}};
}

IntensityFunction intensity_from_json(const nlohmann::json& doc) {
    const std::string kind = doc.at("kind").get<std::string>();
    const double horizon = doc.at("horizon").get<double>();
    const nlohmann::json& params = doc.at("params");
    if (kind == "constant")
        return make_constant_intensity(params.at("rate").get<double>(), horizon);
    if (kind == "sinusoidal")
        return make_sinusoidal_intensity(params.at("a").get<double>(),
                                         params.at("b").get<double>(),
                                         params.at("c").get<double>(), horizon);
    if (kind == "piecewise_constant") {
        auto f = make_piecewise_intensity(
            params.at("breakpoints").get<std::vector<double>>(),
            params.at("rates").get<std::vector<double>>());
        if (f.horizon != horizon)
            throw std::invalid_argument(
                "intensity: horizon disagrees with final breakpoint");
        return f;
    }
    if (kind == "tabulated") {
        auto f = make_tabulated_intensity(params.at("times").get<std::vector<double>>(),
                                          params.at("values").get<std::vector<double>>());
        if (f.horizon != horizon)
            throw std::invalid_argument("intensity: horizon disagrees with final time");
        return f;
    }
    throw std::invalid_argument("intensity: unknown kind \"" + kind + "\"");
}

ArrivalRecord simulate_hpp(double rate, double horizon, RngStream& stream) {
    require(rate > 0.0, "simulate_hpp: rate must be > 0");
    require(horizon >= 0.0, "simulate_hpp: horizon must be >= 0");
    ArrivalRecord record;
    record.intensity = make_constant_intensity(rate, horizon);
    record.seed = stream.seed();
    record.stream = stream.stream();
    double s = 0.0;
    for (;;) {
        s -= std::log(stream.uniform()) / rate;
        if (s >= horizon) break;
        record.epochs.push_back(s);
    }
    return record;
}

ArrivalRecord thin(const ArrivalRecord& hpp, const IntensityFunction& target,
                   RngStream& stream) {
    require(hpp.intensity.kind == IntensityKind::constant,
            "thin: input must come from a constant-rate process");
    const double dominating = hpp.intensity.rate;
    ArrivalRecord record;
    record.intensity = target;
    record.seed = stream.seed();
    record.stream = stream.stream();
    for (double epoch : hpp.epochs) {
        const double lambda = intensity_at(target, epoch);
        if (lambda > dominating)
            throw NumericalError("thin: target rate exceeds the dominating rate at t=" +
                                 std::to_string(epoch));
        if (stream.uniform() <= lambda / dominating) record.epochs.push_back(epoch);
    }
    return record;
}

ArrivalRecord simulate_nhpp(const IntensityFunction& target, const RngStream& stream) {
    ArrivalRecord record;
    record.intensity = target;
    record.seed = stream.seed();
    record.stream = stream.stream();
    if (target.horizon <= 0.0) return record;
    const double dominating = peak_rate(target);
    if (dominating <= 0.0) return record;  // identically-zero rate: no arrivals
    RngStream epoch_stream = stream.child(0);
    RngStream accept_stream = stream.child(1);
    ArrivalRecord hpp = simulate_hpp(dominating, target.horizon, epoch_stream);
    ArrivalRecord thinned = thin(hpp, target, accept_stream);
    record.epochs = std::move(thinned.epochs);
    return record;
}

IntensityFunction build_daily_arrival_schedule(RngStream& stream) {
    // Candidate rates (events/hour) by time-of-day window.
    struct Window {
        double until_h;
        int lo, hi;
    };
    static constexpr Window kWindows[] = {
        {6.0, 1, 4}, {8.0, 5, 11}, {13.0, 1, 4}, {18.0, 12, 17}, {20.0, 5, 11},
        {24.0, 1, 4},
    };
    std::vector<double> breakpoints;
    std::vector<double> rates;
    for (int seg = 0; seg < 48; ++seg) {
        const double start = 0.5 * seg;
        breakpoints.push_back(start);
        const Window* window = kWindows;
        while (start >= window->until_h) ++window;
        const int span = window->hi - window->lo + 1;
        // uniform() is strictly below 1, so the index lands in [0, span).
        const int rate = window->lo + static_cast<int>(stream.uniform() * span);
        rates.push_back(rate);
    }
    breakpoints.push_back(24.0);
    return make_piecewise_intensity(std::move(breakpoints), std::move(rates));
}

}  // namespace loadmix
