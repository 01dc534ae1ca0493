// Shared test oracles, implemented independently of the library under test
// wherever the tested quantity is nontrivial.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "loadmix/numerics.hpp"

namespace testsupport {

// Knuth's product-of-uniforms Poisson sampler (exact for moderate lambda).
inline int poisson_sample(double lambda, loadmix::RngStream& stream) {
    if (lambda < 0.0) throw std::invalid_argument("poisson_sample: lambda < 0");
    const double limit = std::exp(-lambda);
    int k = 0;
    double product = 1.0;
    for (;;) {
        product *= stream.uniform();
        if (product <= limit) return k;
        ++k;
    }
}

// Laplace(mu, b) via the difference-of-exponentials inverse CDF.
inline double laplace_sample(double mu, double b, loadmix::RngStream& stream) {
    const double u = stream.uniform() - 0.5;
    return mu - b * (u < 0.0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
}

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

// Two-sample chi-square test on nonnegative integer samples. Frequency
// tables are built over the observed value range and adjacent cells merged
// until each pooled cell holds at least `min_cell` observations combined.
inline ChiSquareResult chi_square_two_sample(const std::vector<int>& xs,
                                             const std::vector<int>& ys,
                                             int min_cell = 10) {
    int max_value = 0;
    for (int v : xs) max_value = std::max(max_value, v);
    for (int v : ys) max_value = std::max(max_value, v);
    std::vector<double> r(max_value + 1, 0.0), s(max_value + 1, 0.0);
    for (int v : xs) r[v] += 1.0;
    for (int v : ys) s[v] += 1.0;

    std::vector<std::pair<double, double>> cells;
    double acc_r = 0.0, acc_s = 0.0;
    for (int v = 0; v <= max_value; ++v) {
        acc_r += r[v];
        acc_s += s[v];
        if (acc_r + acc_s >= min_cell) {
            cells.emplace_back(acc_r, acc_s);
            acc_r = acc_s = 0.0;
        }
    }
    if (acc_r + acc_s > 0.0) {
        if (cells.empty()) cells.emplace_back(acc_r, acc_s);
        else {
            cells.back().first += acc_r;
            cells.back().second += acc_s;
        }
    }

    const double n_r = static_cast<double>(xs.size());
    const double n_s = static_cast<double>(ys.size());
    const double k1 = std::sqrt(n_s / n_r);
    const double k2 = std::sqrt(n_r / n_s);
    ChiSquareResult result;
    for (const auto& [cr, cs] : cells) {
        const double d = k1 * cr - k2 * cs;
        result.statistic += d * d / (cr + cs);
    }
    result.dof = static_cast<int>(cells.size()) - 1;
    result.p_value = result.dof <= 0
                         ? 1.0
                         : loadmix::gamma_q(result.dof / 2.0, result.statistic / 2.0);
    return result;
}

// Kolmogorov-Smirnov statistic of a sample against a reference CDF.
inline double ks_statistic(std::vector<double> data,
                           const std::function<double(double)>& cdf) {
    std::sort(data.begin(), data.end());
    const double n = static_cast<double>(data.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double f = cdf(data[i]);
        ks = std::max(ks, std::abs(f - i / n));
        ks = std::max(ks, std::abs((i + 1) / n - f));
    }
    return ks;
}

inline double pearson_correlation(const std::vector<double>& a,
                                  const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Type-7 sample quantile (linear interpolation), data must be sorted.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = p * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Exact 1-D two-means clustering: the optimal partition is a sorted split,
// so scan every split point and keep the one with the lowest within-cluster
// sum of squares.
inline std::pair<double, double> exact_two_means(std::vector<double> data) {
    std::sort(data.begin(), data.end());
    const std::size_t n = data.size();
    std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + data[i];
        prefix_sq[i + 1] = prefix_sq[i] + data[i] * data[i];
    }
    auto sse = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
        const double count = static_cast<double>(hi - lo);
        const double sum = prefix[hi] - prefix[lo];
        return (prefix_sq[hi] - prefix_sq[lo]) - sum * sum / count;
    };
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_split = 1;
    for (std::size_t split = 1; split < n; ++split) {
        const double total = sse(0, split) + sse(split, n);
        if (total < best) {
            best = total;
            best_split = split;
        }
    }
    return {prefix[best_split] / best_split,
            (prefix[n] - prefix[best_split]) / (n - best_split)};
}

struct GaussianMixture {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> sigmas;
};

// One EM iteration for a plain Gaussian mixture, written without any of the
// library's mixture machinery.
inline GaussianMixture gaussian_em_step(const std::vector<double>& data,
                                        const GaussianMixture& in) {
    const std::size_t n = data.size(), m = in.weights.size();
    std::vector<double> resp(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double z = (data[i] - in.means[j]) / in.sigmas[j];
            resp[i * m + j] = in.weights[j] *
                              std::exp(-0.5 * z * z) /
                              (in.sigmas[j] * std::sqrt(2.0 * std::numbers::pi));
            denom += resp[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) resp[i * m + j] /= denom;
    }
    GaussianMixture out;
    out.weights.resize(m);
    out.means.resize(m);
    out.sigmas.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        double mass = 0.0, mean_acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mass += resp[i * m + j];
            mean_acc += resp[i * m + j] * data[i];
        }
        out.weights[j] = mass / n;
        out.means[j] = mean_acc / mass;
        double var_acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = data[i] - out.means[j];
            var_acc += resp[i * m + j] * d * d;
        }
        out.sigmas[j] = std::sqrt(var_acc / mass);
    }
    return out;
}

// Brute-force scalar minimizer over a uniform grid (oracle for M-step roots).
inline double grid_minimize(const std::function<double(double)>& f, double lo,
                            double hi, int points = 20001) {
    double best_x = lo, best_f = f(lo);
    for (int i = 1; i < points; ++i) {
        const double x = lo + (hi - lo) * i / (points - 1);
        const double fx = f(x);
        if (fx < best_f) {
            best_f = fx;
            best_x = x;
        }
    }
    return best_x;
}

}  // namespace testsupport
