#include "loadmix/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace loadmix {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
    std::uint64_t st = seed;
    // Mix the seed first, then offset by the stream id in mixed space, so
    // consecutive stream ids land far apart in the splitmix sequence.
    st = splitmix64(st) + stream;
    do {
        for (auto& word : state_) word = splitmix64(st);
    } while (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform() {
    // 53-bit mantissa, shifted half a step off zero: values lie in
    // (2^-54, 1 - 2^-54), never exactly 0 or 1.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::child(std::uint64_t k) const {
    std::uint64_t st = stream_ ^ (0x632BE59BD9B4E019ull * (k + 1));
    return RngStream(seed_, splitmix64(st));
}

// --- Special functions ----------------------------------------------------

namespace {

// Lanczos g = 607/128, 15 coefficients (Godfrey). Relative accuracy ~1e-14
// on the positive real axis.
constexpr double kLanczosG = 4.7421875;
constexpr double kLanczos[15] = {
    0.99999999999999709182,     57.156235665862923517,
    -59.597960355475491248,     14.136097974741747174,
    -0.49191381609762019978,    0.33994649984811888699e-4,
    0.46523628927048575665e-4,  -0.98374475304879564677e-4,
    0.15808870322491248884e-3,  -0.21026444172410488319e-3,
    0.21743961811521264320e-3,  -0.16431810653676389022e-3,
    0.84418223983852743293e-4,  -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
};

double log_gamma_lanczos(double x) {
    // Valid for x >= 1; callers shift smaller arguments up by recurrence.
    double acc = kLanczos[0];
    for (int i = 1; i < 15; ++i) acc += kLanczos[i] / (x - 1.0 + i);
    const double t = x + kLanczosG - 0.5;
    constexpr double half_log_two_pi = 0.91893853320467274178;
    return half_log_two_pi + (x - 0.5) * std::log(t) - t + std::log(acc);
}

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
    if (x < 1.0) {
        // ln Gamma(x) = ln Gamma(x+1) - ln x
        return log_gamma_lanczos(x + 1.0) - std::log(x);
    }
    return log_gamma_lanczos(x);
}

double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
    double result = 0.0;
    // psi(x) = psi(x+1) - 1/x until the asymptotic series is accurate.
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli tail through x^-14; error < 1e-16 for x >= 10.
    double series = inv2 * (1.0 / 12.0
                  - inv2 * (1.0 / 120.0
                  - inv2 * (1.0 / 252.0
                  - inv2 * (1.0 / 240.0
                  - inv2 * (1.0 / 132.0
                  - inv2 * (691.0 / 32760.0
                  - inv2 * (1.0 / 12.0)))))));
    return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: requires x > 0");
    double result = 0.0;
    while (x < 10.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 1.0 + inv * (0.5
                  + inv * (1.0 / 6.0
                  - inv2 * (1.0 / 30.0
                  - inv2 * (1.0 / 42.0
                  - inv2 * (1.0 / 30.0
                  - inv2 * (5.0 / 66.0))))));
    return result + inv * series;
}

namespace {

double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 1000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

double gamma_q_continued_fraction(double a, double x) {
    // Modified Lentz evaluation of the standard continued fraction for Q.
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - log_gamma(a));
}

}  // namespace

namespace {

// Far in the upper tail Q underflows to zero outright; skipping the
// continued fraction there also keeps x = +infinity (from an upstream
// overflow) well defined.
bool gamma_upper_tail_is_zero(double a, double x) {
    return x > 10.0 * a + 700.0;
}

}  // namespace

double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("gamma_p: requires a > 0");
    if (x < 0.0) throw std::domain_error("gamma_p: requires x >= 0");
    if (x == 0.0) return 0.0;
    if (gamma_upper_tail_is_zero(a, x)) return 1.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("gamma_q: requires a > 0");
    if (x < 0.0) throw std::domain_error("gamma_q: requires x >= 0");
    if (x == 0.0) return 1.0;
    if (gamma_upper_tail_is_zero(a, x)) return 0.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_continued_fraction(a, x);
}

double gamma_p_inv(double a, double p) {
    if (!(a > 0.0)) throw std::domain_error("gamma_p_inv: requires a > 0");
    if (p < 0.0 || p >= 1.0)
        throw std::domain_error("gamma_p_inv: requires p in [0, 1)");
    if (p == 0.0) return 0.0;

    double hi = a + 5.0 * std::sqrt(a) + 5.0;
    while (gamma_p(a, hi) < p) hi *= 2.0;

    // Solve for t = log x. For small p the root collapses toward zero like
    // (p*Gamma(a+1))^(1/a) -- far below any fixed absolute bracket width --
    // while in log space it keeps full relative precision. The lower
    // endpoint uses P(a, x) <= x^a / Gamma(a+1), which bounds the root from
    // below; the residual tolerance scales with p so small quantiles stay
    // accurate in relative terms.
    const double lg = log_gamma(a);
    const double t_hi = std::log(hi);
    const double t_lo =
        std::min(t_hi - 30.0, (std::log(p) + log_gamma(a + 1.0)) / a - 5.0);
    auto f_df = [&](double t) {
        const double x = std::exp(t);
        const double f = gamma_p(a, x) - p;
        const double df = std::exp(a * t - x - lg);  // d/dt of P(a, e^t)
        return std::pair{f, df};
    };
    const double tolerance = std::max(1e-16, 1e-12 * p);
    return std::exp(find_root_newton(f_df, {t_lo, t_hi, 300, tolerance}));
}

// --- Root finding ----------------------------------------------------------

namespace {

template <typename Eval>
double safeguarded_root(Eval eval, RootBracket bracket) {
    double lo = bracket.lo;
    double hi = bracket.hi;
    if (!(lo < hi)) throw std::invalid_argument("find_root: requires lo < hi");
    if (!(bracket.tolerance > 0.0))
        throw std::invalid_argument("find_root: requires tolerance > 0");

    auto [flo, dflo] = eval(lo);
    if (flo == 0.0) return lo;
    auto [fhi, dfhi] = eval(hi);
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw NumericalError("find_root: no sign change over bracket");

    double x = 0.5 * (lo + hi);
    double stale_width = std::numeric_limits<double>::infinity();
    double prev_width = hi - lo;
    for (int iter = 0; iter < bracket.max_iterations; ++iter) {
        auto [fx, dfx] = eval(x);
        if (std::abs(fx) <= bracket.tolerance) return x;
        if (fx == 0.0) return x;

        // Shrink the bracket around the sign change.
        if ((fx > 0.0) == (flo > 0.0)) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        const double width = hi - lo;
        // Stop once the endpoints are within tolerance or are adjacent
        // floating-point values; bisecting further cannot improve anything.
        const double width_floor = 4.0 * std::numeric_limits<double>::epsilon() *
                                   std::max(std::abs(lo), std::abs(hi));
        if (width <= bracket.tolerance + width_floor) return 0.5 * (lo + hi);

        double next = x - fx / dfx;  // Newton/secant proposal
        // Bisect when the proposal leaves the bracket, and also whenever two
        // successive steps failed to halve it: without that rule a kinked or
        // noisy objective can let accepted proposals creep along one side and
        // exhaust the iteration budget (stagnation).
        if (!std::isfinite(next) || next <= lo || next >= hi ||
            width > 0.5 * stale_width) {
            next = 0.5 * (lo + hi);
        }
        stale_width = prev_width;
        prev_width = width;
        x = next;
    }
    throw NumericalError("find_root: no convergence within max_iterations");
}

}  // namespace

double find_root(const std::function<double(double)>& f, RootBracket bracket) {
    // Derivative estimated by a secant through the last two evaluations.
    double prev_x = std::numeric_limits<double>::quiet_NaN();
    double prev_f = 0.0;
    auto eval = [&](double x) {
        const double fx = f(x);
        double slope = std::numeric_limits<double>::quiet_NaN();
        if (std::isfinite(prev_x) && x != prev_x) slope = (fx - prev_f) / (x - prev_x);
        prev_x = x;
        prev_f = fx;
        return std::pair{fx, slope};
    };
    return safeguarded_root(eval, bracket);
}

double find_root_newton(const std::function<std::pair<double, double>(double)>& f_df,
                        RootBracket bracket) {
    return safeguarded_root(f_df, bracket);
}

// --- Quadrature -------------------------------------------------------------

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double fa,
                        double b, double fb, double m, double fm, double whole,
                        double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
         + adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = simpson(a, fa, b, fb, fm);
    return adaptive_simpson(f, a, fa, b, fb, m, fm, whole, abs_tol, 48);
}

}  // namespace loadmix
