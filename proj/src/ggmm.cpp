#include "loadmix/ggmm.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "loadmix/load.hpp"

namespace loadmix {

namespace {

void validate_component(const GgdComponent& c) {
    if (!(c.scale > 0.0)) throw std::invalid_argument("ggd: scale must be > 0");
    if (!(c.shape > 0.0)) throw std::invalid_argument("ggd: shape must be > 0");
}

// log of the normalizing constant beta / (2 s Gamma(1/beta)).
double ggd_log_norm(const GgdComponent& c) {
    validate_component(c);
    return std::log(c.shape) - std::log(2.0 * c.scale) - log_gamma(1.0 / c.shape);
}

double data_range(const std::vector<double>& data) {
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    return *hi - *lo;
}

struct EStepResult {
    Responsibilities resp;
    double log_likelihood = 0.0;
    // sum_i r_ij log p_j(y_i) per component, under the model the E-step ran
    // with; this is the component part of the EM objective at the old
    // parameters, reused by the update guard in fit().
    std::vector<double> component_objective;
};

EStepResult e_step_detail(const std::vector<double>& data, const GgmmModel& model) {
    const std::size_t n = data.size();
    const std::size_t m = model.components.size();
    if (m == 0) throw std::invalid_argument("e_step: empty model");
    if (model.weights.size() != m)
        throw std::invalid_argument("e_step: weights/components size mismatch");

    std::vector<double> log_w(m), log_norm(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (!(model.weights[j] > 0.0))
            throw std::invalid_argument("e_step: weights must be > 0");
        log_w[j] = std::log(model.weights[j]);
        log_norm[j] = ggd_log_norm(model.components[j]);
    }

    EStepResult out;
    out.resp.rows = n;
    out.resp.cols = m;
    out.resp.cells.resize(n * m);
    out.component_objective.assign(m, 0.0);

    std::vector<double> joint(m);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            const GgdComponent& c = model.components[j];
            const double lp =
                log_norm[j] - std::pow(std::abs(data[i] - c.location) / c.scale, c.shape);
            joint[j] = log_w[j] + lp;
            best = std::max(best, joint[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) total += std::exp(joint[j] - best);
        out.log_likelihood += best + std::log(total);
        for (std::size_t j = 0; j < m; ++j) {
            const double r = std::exp(joint[j] - best) / total;
            out.resp.at(i, j) = r;
            out.component_objective[j] += r * (joint[j] - log_w[j]);
        }
    }
    return out;
}

}  // namespace

double ggd_log_pdf(double y, const GgdComponent& c) {
    return ggd_log_norm(c) - std::pow(std::abs(y - c.location) / c.scale, c.shape);
}

double ggd_pdf(double y, const GgdComponent& c) {
    return std::exp(ggd_log_pdf(y, c));
}

double mixture_pdf(double y, const GgmmModel& model) {
    double acc = 0.0;
    for (std::size_t j = 0; j < model.components.size(); ++j)
        acc += model.weights[j] * ggd_pdf(y, model.components[j]);
    return acc;
}

double log_likelihood(const std::vector<double>& data, const GgmmModel& model) {
    if (data.empty()) throw std::invalid_argument("log_likelihood: empty data");
    return e_step_detail(data, model).log_likelihood;
}

Responsibilities e_step(const std::vector<double>& data, const GgmmModel& model) {
    return std::move(e_step_detail(data, model).resp);
}

std::vector<double> m_step_weights(const Responsibilities& resp) {
    if (resp.rows == 0 || resp.cols == 0)
        throw std::invalid_argument("m_step_weights: empty responsibilities");
    std::vector<double> weights(resp.cols, 0.0);
    for (std::size_t i = 0; i < resp.rows; ++i)
        for (std::size_t j = 0; j < resp.cols; ++j) weights[j] += resp.at(i, j);
    for (double& w : weights) w /= static_cast<double>(resp.rows);
    return weights;
}

double m_step_location(const std::vector<double>& data, const Responsibilities& resp,
                       std::size_t j, double shape) {
    if (data.size() != resp.rows)
        throw std::invalid_argument("m_step_location: data/responsibility mismatch");
    const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (lo == hi) return lo;

    if (shape == 2.0) {
        // Stationarity reduces to the responsibility-weighted mean.
        double w_sum = 0.0, wy_sum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            w_sum += resp.at(i, j);
            wy_sum += resp.at(i, j) * data[i];
        }
        if (w_sum <= 0.0) throw NumericalError("m_step_location: dead component");
        return wy_sum / w_sum;
    }

    // sum_i r_ij sign(y_i - mu) |y_i - mu|^(shape-1); non-increasing in mu
    // for shape >= 1, and in every case >= 0 at min(data) and <= 0 at
    // max(data), so the bracket always holds a crossing. Points exactly at
    // mu contribute zero.
    auto g = [&](double mu) {
        double acc = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double d = data[i] - mu;
            if (d > 0.0)
                acc += resp.at(i, j) * std::pow(d, shape - 1.0);
            else if (d < 0.0)
                acc -= resp.at(i, j) * std::pow(-d, shape - 1.0);
        }
        return acc;
    };
    return find_root(g, {lo, hi, 200, 1e-11 * (hi - lo)});
}

double m_step_scale(const std::vector<double>& data, const Responsibilities& resp,
                    std::size_t j, double new_location, double shape) {
    if (data.size() != resp.rows)
        throw std::invalid_argument("m_step_scale: data/responsibility mismatch");
    if (!(shape > 0.0)) throw std::invalid_argument("m_step_scale: shape must be > 0");
    double w_sum = 0.0, dev_sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = resp.at(i, j);
        w_sum += r;
        dev_sum += r * std::pow(std::abs(data[i] - new_location), shape);
    }
    if (w_sum <= 0.0) throw NumericalError("m_step_scale: dead component");
    if (dev_sum <= 0.0)
        throw NumericalError("m_step_scale: all responsible mass at the location");
    return std::pow(shape * dev_sum / w_sum, 1.0 / shape);
}

double m_step_shape(const std::vector<double>& data, const Responsibilities& resp,
                    std::size_t j, double mu_ref, double s_ref, double previous_shape,
                    double shape_min, double shape_max, bool* bracket_failed) {
    if (data.size() != resp.rows)
        throw std::invalid_argument("m_step_shape: data/responsibility mismatch");
    if (!(s_ref > 0.0)) throw std::invalid_argument("m_step_shape: scale must be > 0");
    if (bracket_failed) *bracket_failed = false;
    if (shape_min == shape_max) return shape_min;

    // Cache log(|y_i - mu_ref| / s_ref) for the points that contribute the
    // product term; points sitting exactly at mu_ref only contribute the
    // digamma part (the limit of the product term is zero).
    double w_all = 0.0;
    std::vector<double> weight, log_rho;
    weight.reserve(data.size());
    log_rho.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = resp.at(i, j);
        w_all += r;
        const double dist = std::abs(data[i] - mu_ref);
        if (r > 0.0 && dist >= 1e-300) {
            weight.push_back(r);
            log_rho.push_back(std::log(dist / s_ref));
        }
    }
    if (w_all <= 0.0) throw NumericalError("m_step_shape: dead component");

    auto h_and_dh = [&](double b) {
        const double inv = 1.0 / b;
        const double psi = digamma(inv);
        double h = w_all * (inv + psi * inv * inv);
        double dh = w_all * (-inv * inv - trigamma(inv) * inv * inv * inv * inv -
                             2.0 * psi * inv * inv * inv);
        for (std::size_t k = 0; k < weight.size(); ++k) {
            const double powered = weight[k] * std::exp(b * log_rho[k]) * log_rho[k];
            h -= powered;
            dh -= powered * log_rho[k];
        }
        return std::pair{h, dh};
    };

    const double h_lo = h_and_dh(shape_min).first;
    const double h_hi = h_and_dh(shape_max).first;
    if (h_lo == 0.0) return shape_min;
    if (h_hi == 0.0) return shape_max;
    if ((h_lo > 0.0) == (h_hi > 0.0)) {
        if (bracket_failed) *bracket_failed = true;
        return previous_shape;
    }
    return find_root_newton(h_and_dh, {shape_min, shape_max, 100, 1e-10});
}

GgmmModel kmeans_init(const std::vector<double>& data, int m, RngStream& stream,
                      const FitOptions& options) {
    const std::size_t n = data.size();
    if (m < 1) throw std::invalid_argument("kmeans_init: m must be >= 1");
    if (n < static_cast<std::size_t>(m))
        throw std::invalid_argument("kmeans_init: fewer points than components");

    // k-means++ seeding.
    std::vector<double> centers;
    centers.push_back(data[static_cast<std::size_t>(stream.uniform() * n)]);
    std::vector<double> dist2(n);
    while (centers.size() < static_cast<std::size_t>(m)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers) best = std::min(best, (data[i] - c) * (data[i] - c));
            dist2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total > 0.0) {
            const double target = stream.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            // All points coincide with a center; any pick works.
            pick = static_cast<std::size_t>(stream.uniform() * n);
        }
        centers.push_back(data[pick]);
    }

    // Lloyd iterations.
    std::vector<std::size_t> assignment(n, 0);
    for (int iter = 0; iter < options.kmeans_max_iterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best_j = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < centers.size(); ++j) {
                const double d = std::abs(data[i] - centers[j]);
                if (d < best_d) {
                    best_d = d;
                    best_j = j;
                }
            }
            if (assignment[i] != best_j) {
                assignment[i] = best_j;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        std::vector<double> sum(centers.size(), 0.0);
        std::vector<std::size_t> count(centers.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sum[assignment[i]] += data[i];
            ++count[assignment[i]];
        }
        for (std::size_t j = 0; j < centers.size(); ++j) {
            if (count[j] > 0) {
                centers[j] = sum[j] / count[j];
            } else {
                // Re-seed an empty cluster at the point farthest from its
                // current center (deterministic).
                std::size_t far_i = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = std::abs(data[i] - centers[assignment[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far_i = i;
                    }
                }
                centers[j] = data[far_i];
                assignment[far_i] = j;
            }
        }
    }

    // Cluster statistics -> mixture parameters.
    const double range = data_range(data);
    const double scale_floor = std::max(options.scale_floor_rel * range, 1e-12);
    std::vector<double> sum(centers.size(), 0.0);
    std::vector<std::size_t> count(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        sum[assignment[i]] += data[i];
        ++count[assignment[i]];
    }
    std::vector<double> var(centers.size(), 0.0);
    std::vector<double> mean(centers.size(), 0.0);
    for (std::size_t j = 0; j < centers.size(); ++j)
        mean[j] = count[j] > 0 ? sum[j] / count[j] : centers[j];
    for (std::size_t i = 0; i < n; ++i) {
        const double d = data[i] - mean[assignment[i]];
        var[assignment[i]] += d * d;
    }

    GgmmModel model;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        GgdComponent c;
        c.location = mean[j];
        const double sd = count[j] > 0 ? std::sqrt(var[j] / count[j]) : 0.0;
        c.scale = std::max(std::numbers::sqrt2 * sd, scale_floor);
        c.shape = 2.0;
        model.components.push_back(c);
        model.weights.push_back(std::max(static_cast<double>(count[j]), 1.0) /
                                static_cast<double>(n));
    }
    // Normalize (the max() above guards zero-count clusters).
    const double w_total = std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
    for (double& w : model.weights) w /= w_total;

    // Canonical presentation: components ordered by location.
    std::vector<std::size_t> order(model.components.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return model.components[a].location < model.components[b].location;
    });
    GgmmModel sorted;
    for (std::size_t j : order) {
        sorted.components.push_back(model.components[j]);
        sorted.weights.push_back(model.weights[j]);
    }
    return sorted;
}

namespace {

struct CollapseSignal {};

FitReport run_em(const std::vector<double>& data, GgmmModel model,
                 const FitOptions& options) {
    FitReport report;
    report.epsilon = options.epsilon;
    const double scale_floor =
        std::max(options.scale_floor_rel * data_range(data), 1e-12);
    const std::size_t m = model.components.size();

    double previous_ll = 0.0;
    for (int iter = 0;; ++iter) {
        EStepResult e = e_step_detail(data, model);
        report.log_likelihood_trace.push_back(e.log_likelihood);
        if (iter > 0) {
            const double denom = std::max(std::abs(previous_ll), 1e-300);
            if (std::abs(e.log_likelihood - previous_ll) / denom <= options.epsilon) {
                report.converged = true;
                break;
            }
        }
        previous_ll = e.log_likelihood;
        if (iter >= options.max_iterations) break;

        const std::vector<double> weights = m_step_weights(e.resp);
        for (double w : weights)
            if (w < options.weight_floor) throw CollapseSignal{};

        GgmmModel next;
        next.weights = weights;
        next.components.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            const GgdComponent& old = model.components[j];
            GgdComponent full;
            full.location = m_step_location(data, e.resp, j, old.shape);
            try {
                full.scale = m_step_scale(data, e.resp, j, full.location, old.shape);
            } catch (const NumericalError&) {
                throw CollapseSignal{};  // all responsible mass at one point
            }
            if (full.scale < scale_floor) throw CollapseSignal{};
            const double mu_ref =
                options.shape_uses_updated_location ? full.location : old.location;
            bool bracket_failed = false;
            full.shape = m_step_shape(data, e.resp, j, mu_ref, old.scale, old.shape,
                                      options.shape_min, options.shape_max,
                                      &bracket_failed);
            if (bracket_failed) ++report.shape_bracket_failures;

            // Generalized-EM guard: accept the update only where it does
            // not lower the expected complete-data objective; otherwise
            // fall back to the location/scale move alone, or keep the old
            // parameters. This keeps the likelihood trace non-decreasing
            // even when the shape step (which reuses stale reference
            // parameters) overshoots.
            auto objective = [&](const GgdComponent& c) {
                const double log_norm = ggd_log_norm(c);
                double q = 0.0;
                for (std::size_t i = 0; i < data.size(); ++i) {
                    const double r = e.resp.at(i, j);
                    if (r == 0.0) continue;
                    q += r * (log_norm -
                              std::pow(std::abs(data[i] - c.location) / c.scale, c.shape));
                }
                return q;
            };
            GgdComponent chosen = full;
            double best_q = objective(full);
            if (full.shape != old.shape) {
                GgdComponent partial = full;
                partial.shape = old.shape;
                const double q = objective(partial);
                if (q > best_q) {
                    best_q = q;
                    chosen = partial;
                }
            }
            if (e.component_objective[j] > best_q) chosen = old;
            next.components[j] = chosen;
        }
        model = std::move(next);
        ++report.iterations;
    }

    report.model = std::move(model);
    return report;
}

}  // namespace

FitReport fit(const std::vector<double>& data, int m, const FitOptions& options,
              const RngStream& stream) {
    if (m < 1) throw std::invalid_argument("fit: m must be >= 1");
    if (data.size() < static_cast<std::size_t>(m))
        throw std::invalid_argument("fit: fewer points than components");
    if (!(options.epsilon > 0.0)) throw std::invalid_argument("fit: epsilon must be > 0");
    if (data_range(data) <= 0.0)
        throw std::invalid_argument("fit: data are all identical");

    for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
        RngStream init_stream = stream.child(static_cast<std::uint64_t>(attempt));
        GgmmModel init = kmeans_init(data, m, init_stream, options);
        try {
            FitReport report = run_em(data, init, options);
            report.restarts_used = attempt;
            report.mse_vs_histogram = density_mse(data, report.model);
            return report;
        } catch (const CollapseSignal&) {
            continue;
        }
    }
    throw NumericalError("fit: component collapse persisted across restarts");
}

OrderSelection select_order(const std::vector<double>& data, int m_min, int m_max,
                            const FitOptions& options, const RngStream& stream,
                            double min_improvement) {
    if (m_min < 1 || m_max < m_min)
        throw std::invalid_argument("select_order: invalid order range");

    std::vector<std::future<FitReport>> futures;
    for (int m = m_min; m <= m_max; ++m) {
        futures.push_back(std::async(std::launch::async, [&, m] {
            return fit(data, m, options, stream.child(static_cast<std::uint64_t>(m)));
        }));
    }

    OrderSelection selection;
    std::string failures;
    for (int m = m_min; m <= m_max; ++m) {
        try {
            FitReport report = futures[static_cast<std::size_t>(m - m_min)].get();
            selection.orders.push_back(m);
            selection.reports.push_back(std::move(report));
        } catch (const std::exception& err) {
            failures += (failures.empty() ? "" : "; ");
            failures += "m=" + std::to_string(m) + ": " + err.what();
        }
    }
    if (selection.orders.empty())
        throw NumericalError("select_order: every fit failed (" + failures + ")");

    // Keep the largest order that still improves the density MSE on its
    // predecessor by at least min_improvement (relative); below that the
    // added components no longer pay for themselves.
    selection.best_m = selection.orders.front();
    for (std::size_t k = 1; k < selection.orders.size(); ++k) {
        const double previous = selection.reports[k - 1].mse_vs_histogram;
        const double current = selection.reports[k].mse_vs_histogram;
        const double improvement =
            (previous - current) / std::max(std::abs(previous), 1e-300);
        if (improvement >= min_improvement) selection.best_m = selection.orders[k];
    }
    return selection;
}

double density_mse(const std::vector<double>& data, const GgmmModel& model) {
    const Histogram h = histogram(data, freedman_diaconis_bins(data));
    double acc = 0.0;
    for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
        const double center = 0.5 * (h.edges[b] + h.edges[b + 1]);
        const double delta = mixture_pdf(center, model) - h.densities[b];
        acc += delta * delta;
    }
    return acc / static_cast<double>(h.densities.size());
}

double mixture_cdf(double y, const GgmmModel& model) {
    double acc = 0.0;
    for (std::size_t j = 0; j < model.components.size(); ++j) {
        const GgdComponent& c = model.components[j];
        validate_component(c);
        const double z = std::pow(std::abs(y - c.location) / c.scale, c.shape);
        const double tail = 0.5 * gamma_p(1.0 / c.shape, z);
        acc += model.weights[j] * (y >= c.location ? 0.5 + tail : 0.5 - tail);
    }
    return acc;
}

double ggd_quantile(double u, const GgdComponent& c) {
    validate_component(c);
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("ggd_quantile: u must be inside (0, 1)");
    if (u == 0.5) return c.location;
    const double z = gamma_p_inv(1.0 / c.shape, std::abs(2.0 * u - 1.0));
    const double offset = c.scale * std::pow(z, 1.0 / c.shape);
    return u > 0.5 ? c.location + offset : c.location - offset;
}

std::vector<double> sample(const GgmmModel& model, std::size_t n, RngStream& stream) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double u = stream.uniform();
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const GgdComponent& c : model.components) {
            const double q = ggd_quantile(u, c);
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        // The mixture quantile lies between the extreme component
        // quantiles. Floating noise can put the CDF a hair past u at an
        // endpoint; both cases mean the endpoint already is the answer.
        if (hi - lo < 1e-300) {
            out.push_back(lo);
            continue;
        }
        if (mixture_cdf(lo, model) - u >= 0.0) {
            out.push_back(lo);
            continue;
        }
        if (mixture_cdf(hi, model) - u <= 0.0) {
            out.push_back(hi);
            continue;
        }
        auto f_df = [&](double y) {
            return std::pair{mixture_cdf(y, model) - u, mixture_pdf(y, model)};
        };
        out.push_back(find_root_newton(f_df, {lo, hi, 200, 1e-12}));
    }
    return out;
}

nlohmann::json model_to_json(const ModelDocument& doc) {
    nlohmann::json components = nlohmann::json::array();
    for (std::size_t j = 0; j < doc.model.components.size(); ++j) {
        const GgdComponent& c = doc.model.components[j];
        components.push_back({{"weight", doc.model.weights[j]},
                              {"location", c.location},
                              {"scale", c.scale},
                              {"shape", c.shape}});
    }
    return nlohmann::json{{"M", doc.model.order()},
                          {"epsilon", doc.epsilon},
                          {"seed", doc.seed},
                          {"components", components},
                          {"log_likelihood", doc.log_likelihood},
                          {"iterations", doc.iterations},
                          {"mse", doc.mse}};
}

ModelDocument model_from_json(const nlohmann::json& json_doc) {
    ModelDocument doc;
    const auto& components = json_doc.at("components");
    for (const auto& entry : components) {
        doc.model.weights.push_back(entry.at("weight").get<double>());
        GgdComponent c;
        c.location = entry.at("location").get<double>();
        c.scale = entry.at("scale").get<double>();
        c.shape = entry.at("shape").get<double>();
        doc.model.components.push_back(c);
    }
    if (json_doc.at("M").get<int>() != doc.model.order())
        throw std::invalid_argument("model: M disagrees with the component list");
    doc.epsilon = json_doc.at("epsilon").get<double>();
    doc.seed = json_doc.at("seed").get<std::uint64_t>();
    doc.log_likelihood = json_doc.at("log_likelihood").get<double>();
    doc.iterations = json_doc.at("iterations").get<int>();
    doc.mse = json_doc.at("mse").is_null()
                  ? std::numeric_limits<double>::quiet_NaN()
                  : json_doc.at("mse").get<double>();
    return doc;
}

}  // namespace loadmix
