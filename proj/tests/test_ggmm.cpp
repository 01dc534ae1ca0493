#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "loadmix/ggmm.hpp"
#include "loadmix/numerics.hpp"
#include "test_support.hpp"

using namespace loadmix;

namespace {

Responsibilities unit_responsibilities(std::size_t n) {
    Responsibilities r;
    r.rows = n;
    r.cols = 1;
    r.cells.assign(n, 1.0);
    return r;
}

GgmmModel two_component_model() {
    GgmmModel model;
    model.weights = {0.4, 0.6};
    model.components = {{-1.0, std::numbers::sqrt2, 2.0},
                        {2.0, 1.5 * std::numbers::sqrt2, 2.0}};
    return model;
}

std::vector<double> gaussian_data(std::size_t n, double mu, double sigma,
                                  RngStream stream) {
    std::vector<double> data(n);
    for (auto& y : data) y = mu + sigma * stream.normal();
    return data;
}

}  // namespace

TEST_CASE("ggd_pdf: Laplace and Gaussian special cases") {
    const GgdComponent laplace{0.0, 1.0, 1.0};
    CHECK(ggd_pdf(0.0, laplace) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(ggd_pdf(1.0, laplace) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-13));

    const GgdComponent gauss{0.0, std::numbers::sqrt2, 2.0};  // sigma = 1
    CHECK(ggd_pdf(0.0, gauss) ==
          doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-13));
    CHECK(ggd_pdf(1.0, gauss) ==
          doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi))
              .epsilon(1e-13));

    const GgdComponent shifted{5.0, 2.0, 1.3};
    for (double d : {0.1, 0.7, 2.9}) {
        CHECK(ggd_pdf(5.0 + d, shifted) ==
              doctest::Approx(ggd_pdf(5.0 - d, shifted)).epsilon(1e-14));
    }
    CHECK(ggd_log_pdf(6.1, shifted) ==
          doctest::Approx(std::log(ggd_pdf(6.1, shifted))).epsilon(1e-12));
    CHECK_THROWS_AS((void)ggd_pdf(0.0, GgdComponent{0.0, 0.0, 2.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)ggd_pdf(0.0, GgdComponent{0.0, 1.0, -1.0}),
                    std::invalid_argument);
}

TEST_CASE("ggd_pdf: density integrates to one across shapes") {
    for (double shape : {0.6, 1.0, 2.0, 4.0}) {
        const GgdComponent c{1.5, 0.8, shape};
        // Half-width where (|y-mu|/s)^shape = 40, i.e. tail mass < 1e-17.
        const double half_width = 0.8 * std::pow(40.0, 1.0 / shape);
        const double area = integrate([&](double y) { return ggd_pdf(y, c); },
                                      1.5 - half_width, 1.5 + half_width, 1e-9);
        CHECK(area == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("mixture_pdf: convex combination of the components") {
    const GgmmModel model = two_component_model();
    for (double y : {-3.0, -1.0, 0.4, 2.0, 6.5}) {
        const double direct = 0.4 * ggd_pdf(y, model.components[0]) +
                              0.6 * ggd_pdf(y, model.components[1]);
        CHECK(mixture_pdf(y, model) == doctest::Approx(direct).epsilon(1e-14));
    }
}

TEST_CASE("log_likelihood: pointwise and additive") {
    GgmmModel single;
    single.weights = {1.0};
    single.components = {{0.0, std::numbers::sqrt2, 2.0}};
    CHECK(log_likelihood({0.0}, single) ==
          doctest::Approx(-0.9189385332046727).epsilon(1e-12));

    const std::vector<double> part1{0.3, -1.2}, part2{2.2};
    std::vector<double> all = part1;
    all.insert(all.end(), part2.begin(), part2.end());
    CHECK(log_likelihood(all, single) ==
          doctest::Approx(log_likelihood(part1, single) +
                          log_likelihood(part2, single)).epsilon(1e-12));
    CHECK_THROWS_AS((void)log_likelihood({}, single), std::invalid_argument);
}

TEST_CASE("e_step: Bayes responsibilities") {
    const GgmmModel model = two_component_model();
    const std::vector<double> data{0.5, -1.0, 2.0, -30.0, 40.0};
    const Responsibilities resp = e_step(data, model);
    REQUIRE(resp.rows == data.size());
    REQUIRE(resp.cols == 2);
    for (std::size_t i = 0; i < resp.rows; ++i) {
        CHECK(resp.at(i, 0) + resp.at(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
        // Independent direct evaluation of Bayes' rule.
        const double p0 = 0.4 * ggd_pdf(data[i], model.components[0]);
        const double p1 = 0.6 * ggd_pdf(data[i], model.components[1]);
        if (p0 + p1 > 0.0) {
            CHECK(resp.at(i, 0) == doctest::Approx(p0 / (p0 + p1)).epsilon(1e-10));
        }
    }
    // Deep in either tail the broader component (index 1) dominates, because
    // the narrow component's density decays faster with distance.
    CHECK(resp.at(3, 1) > 0.999);
    CHECK(resp.at(4, 1) > 0.999);
}

TEST_CASE("e_step: far outliers keep finite, normalized rows") {
    GgmmModel model = two_component_model();
    const Responsibilities resp = e_step({1e6, -1e6}, model);
    for (std::size_t i = 0; i < 2; ++i) {
        const double row = resp.at(i, 0) + resp.at(i, 1);
        CHECK(std::isfinite(row));
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("m_step_weights: column means") {
    Responsibilities resp;
    resp.rows = 4;
    resp.cols = 2;
    resp.cells = {1.0, 0.0, 0.5, 0.5, 0.25, 0.75, 0.25, 0.75};
    const std::vector<double> w = m_step_weights(resp);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
}

TEST_CASE("m_step_location: shape 2 is the responsibility-weighted mean") {
    const std::vector<double> data{1.0, 2.0, 4.0, 10.0};
    Responsibilities resp;
    resp.rows = 4;
    resp.cols = 1;
    resp.cells = {0.1, 0.2, 0.3, 0.4};
    const double expected =
        (0.1 * 1.0 + 0.2 * 2.0 + 0.3 * 4.0 + 0.4 * 10.0) / 1.0;
    CHECK(m_step_location(data, resp, 0, 2.0) ==
          doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("m_step_location: shape 1 matches the weighted-median objective") {
    const std::vector<double> data{0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 30.0};
    Responsibilities resp;
    resp.rows = data.size();
    resp.cols = 1;
    resp.cells = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    const double located = m_step_location(data, resp, 0, 1.0);
    const double oracle = testsupport::grid_minimize(
        [&](double mu) {
            double acc = 0.0;
            for (double y : data) acc += std::abs(y - mu);
            return acc;
        },
        0.0, 30.0);
    CHECK(located == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("m_step_location: symmetric data land on the center") {
    const std::vector<double> data{-4.0, -1.0, 1.0, 4.0};
    Responsibilities resp = unit_responsibilities(data.size());
    for (double shape : {1.4, 2.0, 3.1}) {
        CHECK(m_step_location(data, resp, 0, shape) ==
              doctest::Approx(0.0).epsilon(1e-8));
    }
}

TEST_CASE("m_step_location: smooth shapes minimize the weighted power objective") {
    const std::vector<double> data{0.2, 0.9, 1.4, 2.2, 5.0, 5.2, 5.9};
    Responsibilities resp;
    resp.rows = data.size();
    resp.cols = 1;
    resp.cells = {0.5, 1.0, 1.0, 0.7, 1.0, 0.3, 1.0};
    for (double shape : {1.5, 2.5}) {
        const double located = m_step_location(data, resp, 0, shape);
        const double oracle = testsupport::grid_minimize(
            [&](double mu) {
                double acc = 0.0;
                for (std::size_t i = 0; i < data.size(); ++i)
                    acc += resp.cells[i] * std::pow(std::abs(data[i] - mu), shape);
                return acc;
            },
            0.2, 5.9);
        CHECK(located == doctest::Approx(oracle).epsilon(0.001));
    }
}

TEST_CASE("m_step_location: below-one shapes return a stationary point") {
    const std::vector<double> data{0.0, 0.4, 1.1, 2.0, 2.3, 7.0};
    Responsibilities resp = unit_responsibilities(data.size());
    const double located = m_step_location(data, resp, 0, 0.7);
    CHECK(std::isfinite(located));
    CHECK(located >= 0.0);
    CHECK(located <= 7.0);
    // The stationarity function changes sign across the returned point.
    auto g = [&](double mu) {
        double acc = 0.0;
        for (double y : data) {
            const double d = y - mu;
            if (d != 0.0)
                acc += (d > 0.0 ? 1.0 : -1.0) * std::pow(std::abs(d), 0.7 - 1.0);
        }
        return acc;
    };
    CHECK(g(located - 1e-6) * g(located + 1e-6) <= 0.0);
}

TEST_CASE("m_step_scale: closed forms for Gaussian and Laplace shapes") {
    const std::vector<double> data{1.0, 3.0, 4.0, 8.0};
    Responsibilities resp;
    resp.rows = 4;
    resp.cols = 1;
    resp.cells = {0.2, 0.4, 0.3, 0.1};
    const double mu = 3.0;

    double mass = 0.0, abs_acc = 0.0, sq_acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        mass += resp.cells[i];
        abs_acc += resp.cells[i] * std::abs(data[i] - mu);
        sq_acc += resp.cells[i] * (data[i] - mu) * (data[i] - mu);
    }
    CHECK(m_step_scale(data, resp, 0, mu, 2.0) ==
          doctest::Approx(std::sqrt(2.0 * sq_acc / mass)).epsilon(1e-13));
    CHECK(m_step_scale(data, resp, 0, mu, 1.0) ==
          doctest::Approx(abs_acc / mass).epsilon(1e-13));
}

TEST_CASE("m_step_scale: maximizes the expected log-density in scale") {
    const std::vector<double> data{0.5, 1.0, 2.5, 4.0, 4.2, 6.0};
    Responsibilities resp;
    resp.rows = data.size();
    resp.cols = 1;
    resp.cells = {1.0, 0.4, 0.8, 1.0, 0.6, 0.9};
    for (double shape : {0.8, 1.7, 3.0}) {
        const double mu = 2.5;
        const double s = m_step_scale(data, resp, 0, mu, shape);
        auto objective = [&](double scale) {
            double acc = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i)
                acc += resp.cells[i] *
                       ggd_log_pdf(data[i], GgdComponent{mu, scale, shape});
            return acc;
        };
        CHECK(objective(s) >= objective(s * 1.01));
        CHECK(objective(s) >= objective(s * 0.99));
    }
}

TEST_CASE("m_step_scale: degenerate mass at the location") {
    const std::vector<double> data{2.0, 2.0, 2.0};
    Responsibilities resp = unit_responsibilities(3);
    CHECK_THROWS_AS((void)m_step_scale(data, resp, 0, 2.0, 2.0), NumericalError);
}

TEST_CASE("m_step_shape: stationary point of the expected log-density") {
    const std::vector<double> data{-1.4, -0.6, -0.1, 0.3, 0.9, 1.8, 2.5};
    Responsibilities resp;
    resp.rows = data.size();
    resp.cols = 1;
    resp.cells = {0.9, 1.0, 0.7, 1.0, 1.0, 0.5, 0.8};
    const double mu_ref = 0.2, s_ref = 1.3;
    bool failed = false;
    const double shape =
        m_step_shape(data, resp, 0, mu_ref, s_ref, 2.0, 0.2, 10.0, &failed);
    REQUIRE_FALSE(failed);
    // Independent oracle: maximize the responsibility-weighted log-density
    // over the shape on a fine grid, holding location and scale fixed.
    const double oracle = testsupport::grid_minimize(
        [&](double beta) {
            double acc = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i)
                acc -= resp.cells[i] *
                       ggd_log_pdf(data[i], GgdComponent{mu_ref, s_ref, beta});
            return acc;
        },
        0.2, 10.0, 50001);
    CHECK(shape == doctest::Approx(oracle).epsilon(0.002));
}

TEST_CASE("m_step_shape: recovers the generating family") {
    const int n = 20000;
    Responsibilities resp = unit_responsibilities(n);

    std::vector<double> gauss(n);
    RngStream g_stream(777, 0);
    for (auto& y : gauss) y = g_stream.normal();
    double mean = 0.0;
    for (double y : gauss) mean += y;
    mean /= n;
    Responsibilities unit = unit_responsibilities(n);
    const double s2 = m_step_scale(gauss, unit, 0, mean, 2.0);
    bool failed = false;
    const double beta_gauss =
        m_step_shape(gauss, unit, 0, mean, s2, 2.0, 0.2, 10.0, &failed);
    REQUIRE_FALSE(failed);
    CHECK(beta_gauss > 1.9);
    CHECK(beta_gauss < 2.1);

    std::vector<double> laplace(n);
    RngStream l_stream(777, 1);
    for (auto& y : laplace) y = testsupport::laplace_sample(0.0, 1.0, l_stream);
    const double med = m_step_location(laplace, resp, 0, 1.0);
    const double s1 = m_step_scale(laplace, resp, 0, med, 1.0);
    const double beta_laplace =
        m_step_shape(laplace, resp, 0, med, s1, 1.0, 0.2, 10.0, &failed);
    REQUIRE_FALSE(failed);
    CHECK(beta_laplace > 0.93);
    CHECK(beta_laplace < 1.07);
}

TEST_CASE("m_step_shape: failed bracket returns the previous shape") {
    std::vector<double> gauss(500);
    RngStream stream(12, 0);
    for (auto& y : gauss) y = stream.normal();
    Responsibilities resp = unit_responsibilities(gauss.size());
    bool failed = false;
    const double shape =
        m_step_shape(gauss, resp, 0, 0.0, std::numbers::sqrt2, 3.3, 6.0, 10.0, &failed);
    CHECK(failed);
    CHECK(shape == 3.3);
}

TEST_CASE("m_step_shape: points at the reference location are handled") {
    const std::vector<double> data{0.0, 0.0, -1.0, 1.0, 2.0, -2.2, 0.7};
    Responsibilities resp = unit_responsibilities(data.size());
    bool failed = false;
    const double shape = m_step_shape(data, resp, 0, 0.0, 1.2, 2.0, 0.2, 10.0, &failed);
    CHECK(std::isfinite(shape));
    CHECK(shape >= 0.2);
    CHECK(shape <= 10.0);
}

TEST_CASE("kmeans_init: single component summarizes the data") {
    const std::vector<double> data{1.0, 2.0, 3.0, 4.0};
    RngStream stream(9, 9);
    const GgmmModel model = kmeans_init(data, 1, stream);
    REQUIRE(model.order() == 1);
    CHECK(model.weights[0] == doctest::Approx(1.0));
    CHECK(model.components[0].location == doctest::Approx(2.5));
    const double sd = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 4.0);
    CHECK(model.components[0].scale ==
          doctest::Approx(std::numbers::sqrt2 * sd).epsilon(1e-12));
    CHECK(model.components[0].shape == 2.0);
}

TEST_CASE("kmeans_init: two separated clouds match exact 2-means") {
    std::vector<double> data;
    RngStream gen(1234, 0);
    for (int i = 0; i < 300; ++i) data.push_back(-6.0 + 0.5 * gen.normal());
    for (int i = 0; i < 700; ++i) data.push_back(4.0 + 0.8 * gen.normal());
    const auto [lo_center, hi_center] = testsupport::exact_two_means(data);

    RngStream stream(42, 0);
    const GgmmModel model = kmeans_init(data, 2, stream);
    REQUIRE(model.order() == 2);
    CHECK(model.components[0].location < model.components[1].location);
    CHECK(model.components[0].location == doctest::Approx(lo_center).epsilon(0.02));
    CHECK(model.components[1].location == doctest::Approx(hi_center).epsilon(0.02));
    CHECK(model.weights[0] == doctest::Approx(0.3).epsilon(0.05));
    CHECK(model.weights[1] == doctest::Approx(0.7).epsilon(0.05));

    RngStream replay(42, 0);
    const GgmmModel again = kmeans_init(data, 2, replay);
    CHECK(again.components[0].location == model.components[0].location);
    CHECK(again.components[1].location == model.components[1].location);
}

TEST_CASE("fit: single-component Gaussian recovery") {
    const std::vector<double> data = gaussian_data(20000, 3.0, 2.0, RngStream(555, 0));
    FitOptions options;
    const FitReport report = fit(data, 1, options, RngStream(555, 1));
    REQUIRE(report.model.order() == 1);
    CHECK(report.converged);
    CHECK(report.model.weights[0] == doctest::Approx(1.0));
    CHECK(report.model.components[0].location == doctest::Approx(3.0).epsilon(0.02));
    CHECK(report.model.components[0].scale ==
          doctest::Approx(2.0 * std::numbers::sqrt2).epsilon(0.03));
    CHECK(report.model.components[0].shape == doctest::Approx(2.0).epsilon(0.08));
    CHECK(report.iterations >= 1);
    CHECK(report.log_likelihood_trace.size() ==
          static_cast<std::size_t>(report.iterations) + 1);
    for (std::size_t i = 1; i < report.log_likelihood_trace.size(); ++i) {
        CHECK(report.log_likelihood_trace[i] >=
              report.log_likelihood_trace[i - 1] - 1e-10);
    }
    CHECK(std::isfinite(report.mse_vs_histogram));
}

TEST_CASE("fit: input validation") {
    const std::vector<double> data{1.0, 2.0, 3.0};
    FitOptions options;
    CHECK_THROWS_AS((void)fit(data, 0, options, RngStream(1)), std::invalid_argument);
    CHECK_THROWS_AS((void)fit(data, 4, options, RngStream(1)), std::invalid_argument);
    FitOptions bad_eps;
    bad_eps.epsilon = 0.0;
    CHECK_THROWS_AS((void)fit(data, 1, bad_eps, RngStream(1)), std::invalid_argument);
    const std::vector<double> flat{5.0, 5.0, 5.0, 5.0};
    CHECK_THROWS_AS((void)fit(flat, 1, options, RngStream(1)), std::invalid_argument);
}

TEST_CASE("fit: frozen shape 2 reproduces an independent Gaussian EM step") {
    std::vector<double> data;
    RngStream gen(31415, 0);
    for (int i = 0; i < 400; ++i) data.push_back(-1.0 + 1.0 * gen.normal());
    for (int i = 0; i < 600; ++i) data.push_back(2.0 + 1.5 * gen.normal());

    GgmmModel model;
    model.weights = {0.4, 0.6};
    model.components = {{-1.0, std::numbers::sqrt2, 2.0},
                        {2.0, 1.5 * std::numbers::sqrt2, 2.0}};

    // One manual EM iteration with the shape frozen at 2.
    const Responsibilities resp = e_step(data, model);
    const std::vector<double> new_weights = m_step_weights(resp);
    std::vector<double> new_locations(2), new_scales(2);
    for (std::size_t j = 0; j < 2; ++j) {
        new_locations[j] = m_step_location(data, resp, j, 2.0);
        new_scales[j] = m_step_scale(data, resp, j, new_locations[j], 2.0);
    }

    testsupport::GaussianMixture reference;
    reference.weights = {0.4, 0.6};
    reference.means = {-1.0, 2.0};
    reference.sigmas = {1.0, 1.5};
    const testsupport::GaussianMixture stepped =
        testsupport::gaussian_em_step(data, reference);

    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(new_weights[j] == doctest::Approx(stepped.weights[j]).epsilon(1e-10));
        CHECK(new_locations[j] == doctest::Approx(stepped.means[j]).epsilon(1e-10));
        CHECK(new_scales[j] ==
              doctest::Approx(std::numbers::sqrt2 * stepped.sigmas[j]).epsilon(1e-10));
    }
}

TEST_CASE("fit: affine change of data moves the parameters accordingly") {
    std::vector<double> data;
    RngStream gen(2627, 0);
    for (int i = 0; i < 500; ++i) data.push_back(-4.0 + 0.8 * gen.normal());
    for (int i = 0; i < 500; ++i) data.push_back(4.0 + 1.1 * gen.normal());
    std::vector<double> moved(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) moved[i] = 2.0 * data[i] + 10.0;

    // The stopping rule is relative to the log-likelihood magnitude, which an
    // affine map shifts; converge deep enough that both runs reach the same
    // fixed point.
    FitOptions options;
    options.max_iterations = 5000;
    options.epsilon = 1e-12;
    const FitReport base = fit(data, 2, options, RngStream(2627, 1));
    const FitReport scaled = fit(moved, 2, options, RngStream(2627, 1));
    for (int j = 0; j < 2; ++j) {
        CHECK(scaled.model.components[j].location ==
              doctest::Approx(2.0 * base.model.components[j].location + 10.0)
                  .epsilon(1e-4));
        CHECK(scaled.model.components[j].scale ==
              doctest::Approx(2.0 * base.model.components[j].scale).epsilon(1e-4));
        CHECK(scaled.model.components[j].shape ==
              doctest::Approx(base.model.components[j].shape).epsilon(1e-4));
        CHECK(scaled.model.weights[j] ==
              doctest::Approx(base.model.weights[j]).epsilon(1e-6));
    }
}

// Independent restatement of the selection rule: the largest order whose
// density MSE improves on its predecessor by at least min_improvement.
static int selection_rule_oracle(const OrderSelection& selection,
                                 double min_improvement) {
    int best = selection.orders.front();
    for (std::size_t k = 1; k < selection.orders.size(); ++k) {
        const double previous = selection.reports[k - 1].mse_vs_histogram;
        const double current = selection.reports[k].mse_vs_histogram;
        if ((previous - current) / std::abs(previous) >= min_improvement)
            best = selection.orders[k];
    }
    return best;
}

TEST_CASE("select_order: applies the improvement rule and prefers the richer "
          "model on bimodal data") {
    RngStream gen(909, 0);
    std::vector<double> unimodal = gaussian_data(3000, 10.0, 1.5, gen.child(0));
    FitOptions options;
    options.max_iterations = 400;
    const OrderSelection one =
        select_order(unimodal, 1, 3, options, RngStream(909, 1));
    REQUIRE(one.orders.size() == 3);
    CHECK(one.orders == std::vector<int>{1, 2, 3});
    CHECK(one.best_m == selection_rule_oracle(one, 0.05));
    for (const FitReport& report : one.reports) CHECK(report.mse_vs_histogram >= 0.0);

    // Two humps wide enough for the automatic histogram bins to resolve them:
    // one component cannot explain the data, two must cut the MSE sharply.
    std::vector<double> bimodal;
    RngStream bi(909, 2);
    for (int i = 0; i < 2000; ++i) bimodal.push_back(1.5 * bi.normal());
    for (int i = 0; i < 2000; ++i) bimodal.push_back(12.0 + 1.5 * bi.normal());
    const OrderSelection two =
        select_order(bimodal, 1, 4, options, RngStream(909, 3));
    REQUIRE(two.orders.size() == 4);
    CHECK(two.best_m >= 2);
    CHECK(two.best_m == selection_rule_oracle(two, 0.05));
    CHECK(two.reports[1].mse_vs_histogram < 0.5 * two.reports[0].mse_vs_histogram);

    CHECK_THROWS_AS(
        (void)select_order(unimodal, 3, 2, options, RngStream(909, 4)),
        std::invalid_argument);
}

TEST_CASE("density_mse: better models score lower") {
    const std::vector<double> data = gaussian_data(20000, 0.0, 1.0, RngStream(4242, 0));
    GgmmModel good;
    good.weights = {1.0};
    good.components = {{0.0, std::numbers::sqrt2, 2.0}};
    GgmmModel bad;
    bad.weights = {1.0};
    bad.components = {{3.0, 0.5, 2.0}};
    CHECK(density_mse(data, good) < density_mse(data, bad));
    CHECK(density_mse(data, good) < 1e-4);
}

TEST_CASE("mixture_cdf: closed forms, limits, and the pdf derivative") {
    const GgdComponent gauss{0.0, std::numbers::sqrt2, 2.0};
    GgmmModel normal;
    normal.weights = {1.0};
    normal.components = {gauss};
    CHECK(mixture_cdf(0.0, normal) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(mixture_cdf(1.0, normal) ==
          doctest::Approx(testsupport::normal_cdf(1.0)).epsilon(1e-12));
    CHECK(mixture_cdf(-2.3, normal) ==
          doctest::Approx(testsupport::normal_cdf(-2.3)).epsilon(1e-12));
    CHECK(mixture_cdf(-1e9, normal) == 0.0);
    CHECK(mixture_cdf(1e9, normal) == 1.0);

    GgmmModel laplace;
    laplace.weights = {1.0};
    laplace.components = {{0.0, 1.0, 1.0}};
    CHECK(mixture_cdf(1.0, laplace) ==
          doctest::Approx(1.0 - 0.5 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(mixture_cdf(-1.0, laplace) ==
          doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-12));

    const GgmmModel mix = two_component_model();
    double previous = -1.0;
    for (double y = -8.0; y <= 9.0; y += 0.05) {
        const double cdf = mixture_cdf(y, mix);
        CHECK(cdf >= previous);
        previous = cdf;
    }
    for (double y : {-2.0, -0.5, 1.0, 3.3}) {
        const double h = 1e-5;
        const double derivative =
            (mixture_cdf(y + h, mix) - mixture_cdf(y - h, mix)) / (2.0 * h);
        CHECK(derivative == doctest::Approx(mixture_pdf(y, mix)).epsilon(1e-6));
    }
}

TEST_CASE("ggd_quantile: inverse of the component CDF") {
    for (const GgdComponent& c :
         {GgdComponent{0.0, std::numbers::sqrt2, 2.0}, GgdComponent{2.0, 1.0, 1.0},
          GgdComponent{-3.0, 0.7, 0.8}, GgdComponent{1.0, 2.5, 4.0}}) {
        GgmmModel single;
        single.weights = {1.0};
        single.components = {c};
        CHECK(ggd_quantile(0.5, c) == doctest::Approx(c.location).epsilon(1e-12));
        for (double u : {1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6}) {
            const double y = ggd_quantile(u, c);
            CHECK(mixture_cdf(y, single) == doctest::Approx(u).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS((void)ggd_quantile(0.0, GgdComponent{}), std::domain_error);
    CHECK_THROWS_AS((void)ggd_quantile(1.0, GgdComponent{}), std::domain_error);
}

TEST_CASE("sample: deterministic, unbiased, matches the model CDF") {
    const GgmmModel mix = two_component_model();
    RngStream stream(6060, 0);
    const std::vector<double> draws = sample(mix, 10000, stream);
    REQUIRE(draws.size() == 10000);
    RngStream replay(6060, 0);
    CHECK(sample(mix, 10000, replay) == draws);
    CHECK(sample(mix, 0, stream).empty());

    const double ks = testsupport::ks_statistic(
        draws, [&](double y) { return mixture_cdf(y, mix); });
    CHECK(ks < 0.0163);  // 1% critical value at n = 10000

    // Weight split: the components are far enough apart to count membership.
    GgmmModel split;
    split.weights = {0.3, 0.7};
    split.components = {{-50.0, 1.0, 2.0}, {50.0, 1.0, 2.0}};
    RngStream split_stream(6060, 1);
    const std::vector<double> assigned = sample(split, 10000, split_stream);
    const double left =
        static_cast<double>(std::count_if(assigned.begin(), assigned.end(),
                                          [](double y) { return y < 0.0; }));
    CHECK(left / 10000.0 == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("sample: medians of a symmetric model center on the location") {
    GgmmModel single;
    single.weights = {1.0};
    single.components = {{7.0, 2.0, 1.4}};
    RngStream stream(6061, 0);
    std::vector<double> draws = sample(single, 20001, stream);
    std::sort(draws.begin(), draws.end());
    CHECK(draws[10000] == doctest::Approx(7.0).epsilon(0.01));
}

TEST_CASE("model JSON: exact round trip including the NaN MSE") {
    ModelDocument doc;
    doc.model = two_component_model();
    doc.epsilon = 1e-7;
    doc.seed = 987654321;
    doc.log_likelihood = -1234.5678901234567;
    doc.iterations = 321;
    doc.mse = 0.00012345678901234567;

    const nlohmann::json encoded = model_to_json(doc);
    CHECK(encoded.at("M") == 2);
    const ModelDocument back = model_from_json(encoded);
    CHECK(back.model.weights == doc.model.weights);
    REQUIRE(back.model.order() == 2);
    for (int j = 0; j < 2; ++j) {
        CHECK(back.model.components[j].location == doc.model.components[j].location);
        CHECK(back.model.components[j].scale == doc.model.components[j].scale);
        CHECK(back.model.components[j].shape == doc.model.components[j].shape);
    }
    CHECK(back.epsilon == doc.epsilon);
    CHECK(back.seed == doc.seed);
    CHECK(back.log_likelihood == doc.log_likelihood);
    CHECK(back.iterations == doc.iterations);
    CHECK(back.mse == doc.mse);

    // A NaN MSE serializes as JSON null and must come back as NaN after a
    // full text round trip.
    ModelDocument nan_doc = doc;
    nan_doc.mse = std::numeric_limits<double>::quiet_NaN();
    const std::string nan_text = model_to_json(nan_doc).dump();
    CHECK(nan_text.find("null") != std::string::npos);
    CHECK(std::isnan(model_from_json(nlohmann::json::parse(nan_text)).mse));

    nlohmann::json broken = encoded;
    broken["M"] = 5;
    CHECK_THROWS_AS((void)model_from_json(broken), std::invalid_argument);
}
