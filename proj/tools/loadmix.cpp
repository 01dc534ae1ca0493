#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "loadmix/config.hpp"
#include "loadmix/ev.hpp"
#include "loadmix/ggmm.hpp"
#include "loadmix/load.hpp"
#include "loadmix/nhpp.hpp"
#include "loadmix/version.hpp"

namespace {

using namespace loadmix;

std::string fmt(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string provenance_line(const char* prefix, const RunConfig& config) {
    return std::string(prefix) + " loadmix " + kVersion +
           " | config-hash=" + config_hash(config) +
           " | seed=" + std::to_string(config.seed) + "\n";
}

std::ofstream open_csv(const RunConfig& config, const std::string& name) {
    std::filesystem::create_directories(config.out_dir);
    const auto path = std::filesystem::path(config.out_dir) / name;
    std::ofstream out(path, std::ios::binary);  // binary: newline-stable output
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << provenance_line("#", config);
    return out;
}

void write_json_file(const RunConfig& config, const std::string& name,
                     const nlohmann::json& doc) {
    std::filesystem::create_directories(config.out_dir);
    const auto path = std::filesystem::path(config.out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << provenance_line("//", config) << doc.dump(2) << "\n";
}

void write_series_csv(const RunConfig& config, const std::string& name,
                      const LoadSeries& series) {
    std::ofstream out = open_csv(config, name);
    out << "timestamp,kw\n";
    for (std::size_t i = 0; i < series.values_kw.size(); ++i) {
        const std::int64_t stamp =
            series.start_epoch_s + static_cast<std::int64_t>(i) * series.step_minutes * 60;
        out << format_timestamp(stamp) << "," << fmt(series.values_kw[i]) << "\n";
    }
}

IntensityFunction resolve_intensity(const RunConfig& config, const RngStream& stream) {
    if (config.intensity_is_daily_schedule) {
        RngStream schedule_stream = stream;
        return build_daily_arrival_schedule(schedule_stream);
    }
    return *config.intensity;
}

void write_intensity_csv(const RunConfig& config, const IntensityFunction& intensity) {
    std::ofstream out = open_csv(config, "intensity.csv");
    out << "time,rate\n";
    auto row = [&](double t, double rate) {
        out << fmt(t) << "," << fmt(rate) << "\n";
    };
    switch (intensity.kind) {
        case IntensityKind::constant:
            row(0.0, intensity.rate);
            row(intensity.horizon, intensity.rate);
            break;
        case IntensityKind::piecewise_constant:
            for (std::size_t i = 0; i < intensity.rates.size(); ++i) {
                row(intensity.breakpoints[i], intensity.rates[i]);
                row(intensity.breakpoints[i + 1], intensity.rates[i]);
            }
            break;
        default: {
            const int grid = 480;
            for (int k = 0; k <= grid; ++k) {
                const double t = intensity.horizon * k / grid;
                row(t, intensity_at(intensity, t));
            }
        }
    }
}

// ---------------------------------------------------------------------------

int cmd_simulate_arrivals(const RunConfig& config) {
    const RngStream base(config.seed);
    const IntensityFunction intensity = resolve_intensity(config, base.child(1));

    double mean_count = 0.0;
    ArrivalRecord first;
    for (int r = 0; r < config.replications; ++r) {
        ArrivalRecord record =
            simulate_nhpp(intensity, base.child(2).child(static_cast<std::uint64_t>(r)));
        if (r == 0) first = record;
        mean_count += static_cast<double>(record.count());
    }
    mean_count /= config.replications;

    {
        std::ofstream out = open_csv(config, "arrivals.csv");
        out << "time\n";
        for (double epoch : first.epochs) out << fmt(epoch) << "\n";
    }
    {
        std::ofstream out = open_csv(config, "counts.csv");
        out << "time,count\n0,0\n";
        for (std::size_t k = 0; k < first.epochs.size(); ++k)
            out << fmt(first.epochs[k]) << "," << k + 1 << "\n";
    }
    write_intensity_csv(config, intensity);

    const double analytic = mean_value(intensity, intensity.horizon);
    std::cout << "replications=" << config.replications
              << " simulated_mean=" << fmt(mean_count)
              << " analytic_mean=" << fmt(analytic) << " relative_error="
              << fmt(analytic != 0.0 ? std::abs(mean_count - analytic) / analytic : 0.0)
              << "\n";
    return 0;
}

struct DayProfile {
    std::vector<EVSession> sessions;
    LoadSeries demand;
};

DayProfile simulate_ev_day(const RunConfig& config, const RngStream& base,
                           std::uint64_t day) {
    IntensityFunction intensity =
        config.intensity_is_daily_schedule
            ? resolve_intensity(config, base.child(1).child(day))
            : *config.intensity;
    DayProfile profile;
    ArrivalRecord arrivals = simulate_nhpp(intensity, base.child(3).child(day));
    profile.sessions =
        build_sessions(arrivals, config.battery, config.mileage, base.child(4).child(day));
    profile.demand = aggregate_demand(profile.sessions, config.step_minutes);
    return profile;
}

int cmd_ev_profile(const RunConfig& config) {
    const RngStream base(config.seed);

    DayProfile first;
    std::vector<double> mean_kw;
    double total_required = 0.0, total_truncated = 0.0;
    for (int r = 0; r < config.replications; ++r) {
        DayProfile day = simulate_ev_day(config, base, static_cast<std::uint64_t>(r));
        if (r == 0) {
            first = day;
            mean_kw.assign(day.demand.values_kw.size(), 0.0);
        }
        for (std::size_t i = 0; i < day.demand.values_kw.size(); ++i)
            mean_kw[i] += day.demand.values_kw[i];
        for (const EVSession& s : day.sessions) total_required += s.energy_required_kwh;
        total_truncated += truncated_energy_kwh(day.sessions, 24.0);
    }

    {
        std::ofstream out = open_csv(config, "sessions.csv");
        out << "arrival_time_h,miles,soc_pct,e_req_kwh,t_ch_h,p_kw\n";
        for (const EVSession& s : first.sessions) {
            out << fmt(s.arrival_time_h) << "," << fmt(s.daily_miles) << ","
                << fmt(s.soc_arrival_percent) << "," << fmt(s.energy_required_kwh) << ","
                << fmt(s.charge_duration_h) << "," << fmt(s.power_kw) << "\n";
        }
    }
    write_series_csv(config, "ev_demand.csv", first.demand);
    if (config.replications > 1) {
        LoadSeries mean_series = first.demand;
        for (std::size_t i = 0; i < mean_kw.size(); ++i)
            mean_series.values_kw[i] = mean_kw[i] / config.replications;
        write_series_csv(config, "ev_demand_mean.csv", mean_series);
    }

    // Energy bookkeeping over the whole ensemble: what the sessions ask for
    // equals what the profiles deliver within the day plus the spill past it.
    double ensemble_energy = 0.0;
    for (double v : mean_kw) ensemble_energy += v * config.step_minutes / 60.0;
    std::cout << "replications=" << config.replications << " sessions="
              << first.sessions.size() << " total_e_req_kwh=" << fmt(total_required)
              << " profile_energy_kwh=" << fmt(ensemble_energy)
              << " truncated_kwh=" << fmt(total_truncated) << "\n";
    return 0;
}

// Assemble the fitting samples: measured base load, optionally with one
// simulated EV charging day overlaid per base-load day.
std::vector<double> assemble_fit_data(const RunConfig& config, const RngStream& base,
                                      const std::string& load_path) {
    LoadDataset dataset = ingest_csv(load_path);
    LoadSeries series = dataset.series;
    if (config.with_ev) {
        RunConfig day_config = config;
        day_config.step_minutes = series.step_minutes;
        const std::size_t per_day =
            static_cast<std::size_t>(24 * 60 / series.step_minutes);
        const std::size_t days = (series.values_kw.size() + per_day - 1) / per_day;
        LoadSeries ev;
        ev.start_epoch_s = series.start_epoch_s;
        ev.step_minutes = series.step_minutes;
        for (std::size_t d = 0; d < days; ++d) {
            DayProfile day = simulate_ev_day(day_config, base, d);
            ev.values_kw.insert(ev.values_kw.end(), day.demand.values_kw.begin(),
                                day.demand.values_kw.end());
        }
        ev.values_kw.resize(series.values_kw.size());
        series = combine(series, ev);
    }
    return series.values_kw;
}

void write_fit_outputs(const RunConfig& config, const std::vector<double>& data,
                       const OrderSelection& selection,
                       const std::vector<double>& wall_ms) {
    const FitReport* best = nullptr;
    for (std::size_t k = 0; k < selection.orders.size(); ++k)
        if (selection.orders[k] == selection.best_m) best = &selection.reports[k];

    for (std::size_t k = 0; k < selection.orders.size(); ++k) {
        const int m = selection.orders[k];
        const FitReport& report = selection.reports[k];
        std::ofstream trace =
            open_csv(config, "trace_m" + std::to_string(m) + ".csv");
        trace << "iteration,log_likelihood\n";
        for (std::size_t i = 0; i < report.log_likelihood_trace.size(); ++i)
            trace << i << "," << fmt(report.log_likelihood_trace[i]) << "\n";

        ModelDocument doc{report.model, report.epsilon, config.seed,
                          report.log_likelihood_trace.back(), report.iterations,
                          report.mse_vs_histogram};
        write_json_file(config, "model_m" + std::to_string(m) + ".json",
                        model_to_json(doc));
        if (selection.orders[k] == selection.best_m)
            write_json_file(config, "model.json", model_to_json(doc));
    }

    {
        std::ofstream out = open_csv(config, "em_stats.csv");
        out << "m,iterations,converged,restarts,log_likelihood,mse";
        if (config.timings) out << ",wall_ms";
        out << "\n";
        for (std::size_t k = 0; k < selection.orders.size(); ++k) {
            const FitReport& report = selection.reports[k];
            out << selection.orders[k] << "," << report.iterations << ","
                << (report.converged ? 1 : 0) << "," << report.restarts_used << ","
                << fmt(report.log_likelihood_trace.back()) << ","
                << fmt(report.mse_vs_histogram);
            if (config.timings) out << "," << fmt(wall_ms[k]);
            out << "\n";
        }
    }

    if (selection.orders.size() > 1) {
        std::ofstream out = open_csv(config, "mse.csv");
        out << "m,mse,relative_improvement\n";
        for (std::size_t k = 0; k < selection.orders.size(); ++k) {
            const double mse = selection.reports[k].mse_vs_histogram;
            double improvement = 0.0;
            if (k > 0) {
                const double previous = selection.reports[k - 1].mse_vs_histogram;
                improvement = (previous - mse) / std::max(std::abs(previous), 1e-300);
            }
            out << selection.orders[k] << "," << fmt(mse) << "," << fmt(improvement)
                << "\n";
        }
    }

    if (best != nullptr) {
        const Histogram h = histogram(data, freedman_diaconis_bins(data));
        std::ofstream out = open_csv(config, "histogram_fit.csv");
        out << "bin_center,empirical_density,fitted_density\n";
        for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
            const double center = 0.5 * (h.edges[b] + h.edges[b + 1]);
            out << fmt(center) << "," << fmt(h.densities[b]) << ","
                << fmt(mixture_pdf(center, best->model)) << "\n";
        }
    }
}

int cmd_fit(const RunConfig& config, const std::string& load_arg, bool force_range) {
    const std::string load_path = load_arg.empty() ? config.load_csv : load_arg;
    if (load_path.empty())
        throw ConfigError("fit: no load CSV given (argument or config load_csv)");

    const RngStream base(config.seed);
    const std::vector<double> data = assemble_fit_data(config, base, load_path);

    FitOptions options;
    options.epsilon = config.em_epsilon;
    options.max_iterations = config.em_max_iterations;

    int m_min, m_max;
    if (config.em_m_min > 0) {
        m_min = config.em_m_min;
        m_max = config.em_m_max;
    } else if (config.em_m > 0 && !force_range) {
        m_min = m_max = config.em_m;
    } else if (force_range) {
        m_min = 1;
        m_max = 6;
    } else {
        throw ConfigError("fit: specify --m or --m-range");
    }

    OrderSelection selection;
    std::vector<double> wall_ms;
    const RngStream fit_base = base.child(5);
    if (config.timings) {
        // Serial, timed fits; same child streams (and so the same fits) as
        // the concurrent path in select_order.
        std::string failures;
        for (int m = m_min; m <= m_max; ++m) {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                FitReport report =
                    fit(data, m, options, fit_base.child(static_cast<std::uint64_t>(m)));
                const auto t1 = std::chrono::steady_clock::now();
                selection.orders.push_back(m);
                selection.reports.push_back(std::move(report));
                wall_ms.push_back(
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
            } catch (const std::exception& err) {
                failures += "m=" + std::to_string(m) + ": " + err.what() + "; ";
                std::cerr << "fit failed for m=" << m << ": " << err.what() << "\n";
            }
        }
        if (selection.orders.empty())
            throw NumericalError("fit: every order failed (" + failures + ")");
        selection.best_m = selection.orders.front();
        for (std::size_t k = 1; k < selection.orders.size(); ++k) {
            const double previous = selection.reports[k - 1].mse_vs_histogram;
            const double current = selection.reports[k].mse_vs_histogram;
            if ((previous - current) / std::max(std::abs(previous), 1e-300) >= 0.05)
                selection.best_m = selection.orders[k];
        }
    } else {
        selection = select_order(data, m_min, m_max, options, fit_base);
    }

    write_fit_outputs(config, data, selection, wall_ms);

    std::cout << "samples=" << data.size() << " selected_m=" << selection.best_m << "\n";
    for (std::size_t k = 0; k < selection.orders.size(); ++k) {
        const FitReport& report = selection.reports[k];
        std::cout << "m=" << selection.orders[k] << " iterations=" << report.iterations
                  << " converged=" << (report.converged ? 1 : 0)
                  << " log_likelihood=" << fmt(report.log_likelihood_trace.back())
                  << " mse=" << fmt(report.mse_vs_histogram) << "\n";
    }
    return 0;
}

int cmd_sample(const RunConfig& config, const std::string& model_path, std::size_t n) {
    std::ifstream in(model_path);
    if (!in) throw ConfigError("sample: cannot open " + model_path);
    ModelDocument doc;
    try {
        doc = model_from_json(
            nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true));
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(model_path + ": " + err.what());
    }

    RngStream stream = RngStream(config.seed).child(6);
    std::vector<double> draws = sample(doc.model, n, stream);

    {
        std::ofstream out = open_csv(config, "samples.csv");
        out << "value\n";
        for (double v : draws) out << fmt(v) << "\n";
    }

    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double cdf = mixture_cdf(draws[i], doc.model);
        ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / draws.size()));
        ks = std::max(ks, std::abs(static_cast<double>(i + 1) / draws.size() - cdf));
    }
    std::cout << "n=" << n << " ks_statistic=" << fmt(ks) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Arrival-process load synthesis and generalized Gaussian mixture fitting"};
    app.require_subcommand(1);

    struct Common {
        std::string config_path;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out_dir;
    };
    auto add_common = [](CLI::App* cmd, Common& common) {
        cmd->add_option("--config", common.config_path, "JSON config file");
        cmd->add_option("--seed", common.seed, "RNG seed (overrides config)");
        cmd->add_option("--out", common.out_dir, "output directory");
    };

    Common arrivals_common, ev_common, fit_common, order_common, sample_common;
    std::optional<int> arrivals_reps, ev_reps;
    std::string fit_load, order_load, sample_model;
    std::optional<int> fit_m;
    std::string fit_m_range, order_m_range;
    std::optional<double> fit_epsilon, order_epsilon;
    bool fit_with_ev = false, order_with_ev = false;
    bool fit_timings = false, order_timings = false;
    std::size_t sample_n = 10000;

    CLI::App* arrivals = app.add_subcommand(
        "simulate-arrivals", "simulate a day of arrivals and write epoch/count data");
    add_common(arrivals, arrivals_common);
    arrivals->add_option("--replications", arrivals_reps, "Monte Carlo replications");

    CLI::App* ev = app.add_subcommand(
        "ev-profile", "simulate EV charging sessions and the aggregate demand profile");
    add_common(ev, ev_common);
    ev->add_option("--replications", ev_reps, "Monte Carlo replications");

    CLI::App* fit_cmd =
        app.add_subcommand("fit", "fit a mixture model to a measured load profile");
    add_common(fit_cmd, fit_common);
    fit_cmd->add_option("load_csv", fit_load, "load CSV (timestamp,kw)");
    fit_cmd->add_option("--m", fit_m, "mixture order");
    fit_cmd->add_option("--m-range", fit_m_range, "mixture order range A..B");
    fit_cmd->add_option("--epsilon", fit_epsilon, "EM stopping threshold");
    fit_cmd->add_flag("--with-ev", fit_with_ev, "overlay simulated EV demand");
    fit_cmd->add_flag("--timings", fit_timings, "add wall-clock column to em_stats.csv");

    CLI::App* order = app.add_subcommand(
        "select-order", "fit a range of mixture orders and pick the best");
    add_common(order, order_common);
    order->add_option("load_csv", order_load, "load CSV (timestamp,kw)");
    order->add_option("--m-range", order_m_range, "mixture order range A..B");
    order->add_option("--epsilon", order_epsilon, "EM stopping threshold");
    order->add_flag("--with-ev", order_with_ev, "overlay simulated EV demand");
    order->add_flag("--timings", order_timings, "add wall-clock column to em_stats.csv");

    CLI::App* sample_cmd =
        app.add_subcommand("sample", "draw synthetic samples from a fitted model");
    add_common(sample_cmd, sample_common);
    sample_cmd->add_option("model_json", sample_model, "fitted model JSON")->required();
    sample_cmd->add_option("--n", sample_n, "number of samples");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        std::cerr << err.what() << "\n";
        return 2;
    }

    auto parse_range = [](const std::string& text, RunConfig& config) {
        const auto dots = text.find("..");
        int lo = 0, hi = 0;
        bool ok = dots != std::string::npos;
        if (ok) {
            const char* begin = text.data();
            auto r1 = std::from_chars(begin, begin + dots, lo);
            auto r2 = std::from_chars(begin + dots + 2, begin + text.size(), hi);
            ok = r1.ec == std::errc{} && r1.ptr == begin + dots &&
                 r2.ec == std::errc{} && r2.ptr == begin + text.size();
        }
        if (!ok || lo < 1 || hi < lo)
            throw ConfigError("config: --m-range expects A..B with 1 <= A <= B");
        config.em_m_min = lo;
        config.em_m_max = hi;
        config.em_m = 0;
    };

    auto resolve = [&](const Common& common) {
        RunConfig config = common.config_path.empty()
                               ? RunConfig{}
                               : load_config_file(common.config_path);
        if (common.seed) {
            config.seed = *common.seed;
            config.seed_set = true;
        }
        if (common.out_dir) config.out_dir = *common.out_dir;
        apply_seed_env(config, std::getenv("LOADMIX_SEED"));
        return config;
    };

    try {
        if (arrivals->parsed()) {
            RunConfig config = resolve(arrivals_common);
            if (arrivals_reps) config.replications = *arrivals_reps;
            if (config.replications < 1)
                throw ConfigError("config: replications must be >= 1");
            return cmd_simulate_arrivals(config);
        }
        if (ev->parsed()) {
            RunConfig config = resolve(ev_common);
            if (ev_reps) config.replications = *ev_reps;
            if (config.replications < 1)
                throw ConfigError("config: replications must be >= 1");
            return cmd_ev_profile(config);
        }
        if (fit_cmd->parsed()) {
            RunConfig config = resolve(fit_common);
            if (fit_m) {
                config.em_m = *fit_m;
                config.em_m_min = config.em_m_max = 0;
            }
            if (!fit_m_range.empty()) parse_range(fit_m_range, config);
            if (fit_epsilon) config.em_epsilon = *fit_epsilon;
            if (fit_with_ev) config.with_ev = true;
            if (fit_timings) config.timings = true;
            if (config.em_m < 0 || (fit_m && *fit_m < 1))
                throw ConfigError("config: --m must be >= 1");
            return cmd_fit(config, fit_load, /*force_range=*/false);
        }
        if (order->parsed()) {
            RunConfig config = resolve(order_common);
            if (!order_m_range.empty()) parse_range(order_m_range, config);
            if (order_epsilon) config.em_epsilon = *order_epsilon;
            if (order_with_ev) config.with_ev = true;
            if (order_timings) config.timings = true;
            return cmd_fit(config, order_load, /*force_range=*/true);
        }
        if (sample_cmd->parsed()) {
            RunConfig config = resolve(sample_common);
            return cmd_sample(config, sample_model, sample_n);
        }
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const CsvError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const NumericalError& err) {
        std::cerr << "numerical error: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
    return 0;
}
