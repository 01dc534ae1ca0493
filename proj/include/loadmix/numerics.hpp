#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>

namespace loadmix {

/// Convergence failure in an iterative numerical routine.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic uniform random stream.
///
/// xoshiro256++ seeded through splitmix64 from a (seed, stream-id) pair.
/// Equal (seed, stream) always reproduces the same variate sequence;
/// distinct stream ids under one seed give statistically independent
/// streams. All simulation code derives its randomness from these streams
/// so every run is replayable from its configuration.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

    /// Next raw 64-bit word.
    std::uint64_t next_u64();

    /// Uniform variate strictly inside (0,1), so log(u) is always finite.
    double uniform();

    /// Standard normal variate (Box-Muller, two uniforms per draw).
    double normal();

    /// Derived stream for an independent sub-task (replication, component, ...).
    [[nodiscard]] RngStream child(std::uint64_t k) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t state_[4];
};

// --- Special functions -------------------------------------------------

/// ln Gamma(x) for x > 0 (Lanczos approximation, ~1e-14 relative accuracy).
double log_gamma(double x);

/// Digamma psi(x) = d/dx ln Gamma(x) for x > 0.
double digamma(double x);

/// Trigamma psi'(x) for x > 0.
double trigamma(double x);

/// Regularized lower incomplete gamma P(a, x) = gamma(a,x) / Gamma(a).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Inverse of P(a, .): the x with gamma_p(a, x) = p, for p in [0, 1).
double gamma_p_inv(double a, double p);

// --- Root finding -------------------------------------------------------

struct RootBracket {
    double lo;
    double hi;
    int max_iterations = 100;
    double tolerance = 1e-12;
};

/// Root of f inside [lo, hi]. Requires a sign change over the bracket.
/// Secant steps safeguarded by bisection; iterates never leave the bracket.
double find_root(const std::function<double(double)>& f, RootBracket bracket);

/// Same contract, with Newton steps driven by a combined (f, f') callback.
double find_root_newton(const std::function<std::pair<double, double>(double)>& f_df,
                        RootBracket bracket);

// --- Quadrature ----------------------------------------------------------

/// Adaptive Simpson integral of f over [a, b] to the given absolute tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-9);

}  // namespace loadmix
