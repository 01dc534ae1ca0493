#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "json.hpp"
#include "loadmix/numerics.hpp"

namespace loadmix {

/// One generalized Gaussian component:
///   p(y) = beta / (2 s Gamma(1/beta)) * exp(-(|y - mu| / s)^beta).
/// shape = 1 gives a Laplace density, shape = 2 a Gaussian with
/// sigma = scale / sqrt(2).
struct GgdComponent {
    double location = 0.0;  // mu
    double scale = 1.0;     // s > 0
    double shape = 2.0;     // beta > 0
};

/// Finite convex mixture of generalized Gaussian components.
struct GgmmModel {
    std::vector<double> weights;          // all > 0, sum to 1
    std::vector<GgdComponent> components;
    [[nodiscard]] int order() const { return static_cast<int>(components.size()); }
};

/// Posterior component memberships: rows are observations, columns
/// components; each row sums to 1.
struct Responsibilities {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> cells;  // row-major
    double at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return cells[i * cols + j]; }
};

struct FitOptions {
    double epsilon = 1e-7;       // relative log-likelihood stopping threshold
    int max_iterations = 2000;
    double shape_min = 0.2;
    double shape_max = 10.0;
    double weight_floor = 1e-8;        // below: component collapse
    double scale_floor_rel = 1e-6;     // of the data range
    int max_restarts = 3;              // fresh inits after a collapse
    bool shape_uses_updated_location = false;  // see m_step_shape
    int kmeans_max_iterations = 100;
};

struct FitReport {
    GgmmModel model;
    std::vector<double> log_likelihood_trace;  // entry per iterate, including init
    int iterations = 0;
    bool converged = false;
    double epsilon = 1e-7;
    double mse_vs_histogram = std::numeric_limits<double>::quiet_NaN();
    int restarts_used = 0;
    int shape_bracket_failures = 0;
};

double ggd_pdf(double y, const GgdComponent& c);
double ggd_log_pdf(double y, const GgdComponent& c);
double mixture_pdf(double y, const GgmmModel& model);

/// Sum of log mixture densities, stabilized with per-point log-sum-exp.
double log_likelihood(const std::vector<double>& data, const GgmmModel& model);

Responsibilities e_step(const std::vector<double>& data, const GgmmModel& model);

/// Column means of the responsibilities; sums to 1. A dead component shows
/// up as a zero weight (collapse is handled by fit).
std::vector<double> m_step_weights(const Responsibilities& resp);

/// Location update for component j: solves the stationarity condition
/// sum_i r_ij sign(y_i - mu) |y_i - mu|^(shape-1) = 0 over the bracket
/// [min(data), max(data)]. shape = 2 reduces to the responsibility-weighted
/// mean and is computed in closed form.
double m_step_location(const std::vector<double>& data, const Responsibilities& resp,
                       std::size_t j, double shape);

/// Scale update for component j, in closed form:
/// (shape * sum_i r_ij |y_i - mu|^shape / sum_i r_ij)^(1/shape).
/// Throws NumericalError when every responsible point sits exactly at mu.
double m_step_scale(const std::vector<double>& data, const Responsibilities& resp,
                    std::size_t j, double new_location, double shape);

/// Shape update for component j: root of
///   sum_i r_ij [ 1/b + psi(1/b)/b^2 - rho_i^b log(rho_i) ] = 0,
/// rho_i = |y_i - mu_ref| / s_ref, solved over [shape_min, shape_max].
/// Points at mu_ref contribute only the digamma part. Returns
/// previous_shape (and sets *bracket_failed) when the bracket holds no sign
/// change.
double m_step_shape(const std::vector<double>& data, const Responsibilities& resp,
                    std::size_t j, double mu_ref, double s_ref, double previous_shape,
                    double shape_min, double shape_max, bool* bracket_failed = nullptr);

/// K-means (k-means++ seeding, Lloyd iterations) on the 1-D data; cluster j
/// yields location = mean, scale = sqrt(2) * std (floored), shape = 2,
/// weight = cluster fraction. Components are sorted by location.
GgmmModel kmeans_init(const std::vector<double>& data, int m, RngStream& stream,
                      const FitOptions& options = {});

/// Expectation-maximization fit of an m-component mixture. Iterates until
/// the relative log-likelihood change falls to epsilon or max_iterations;
/// collapses trigger up to max_restarts fresh initializations. Each
/// parameter update is accepted only if it does not lower the expected
/// complete-data objective, so the likelihood trace is non-decreasing.
FitReport fit(const std::vector<double>& data, int m, const FitOptions& options,
              const RngStream& stream);

struct OrderSelection {
    int best_m = 0;
    std::vector<int> orders;
    std::vector<FitReport> reports;  // aligned with orders
};

/// Fit every order in [m_min, m_max] (concurrently, one child stream per
/// order) and keep the largest order whose density MSE still improves on
/// its predecessor by at least min_improvement (relative).
OrderSelection select_order(const std::vector<double>& data, int m_min, int m_max,
                            const FitOptions& options, const RngStream& stream,
                            double min_improvement = 0.05);

/// Mean squared error between the fitted density at histogram bin centers
/// and the empirical histogram density (Freedman-Diaconis binning).
double density_mse(const std::vector<double>& data, const GgmmModel& model);

/// Mixture CDF via the regularized lower incomplete gamma function.
double mixture_cdf(double y, const GgmmModel& model);

/// Quantile of a single component (exact, via the inverse incomplete gamma).
double ggd_quantile(double u, const GgdComponent& c);

/// Inverse-CDF sampling: draws u uniform and solves mixture_cdf(y) = u with
/// a derivative-based solver bracketed by the component quantiles.
std::vector<double> sample(const GgmmModel& model, std::size_t n, RngStream& stream);

/// Serialized fit artifact; round-trips through JSON exactly.
struct ModelDocument {
    GgmmModel model;
    double epsilon = 1e-7;
    std::uint64_t seed = 0;
    double log_likelihood = 0.0;
    int iterations = 0;
    double mse = std::numeric_limits<double>::quiet_NaN();
};

nlohmann::json model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const nlohmann::json& doc);

}  // namespace loadmix
