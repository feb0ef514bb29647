#pragma once

#include "design.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nbpss {

/// Hyperparameters of the spike-and-slab hierarchy for one effect.
struct NbpssHyper {
    double a = 5.0;     ///< shape of IG(a, b) on psi^2
    double b = 1.0;     ///< scale of IG(a, b), usually elicited
    double r = 0.01;    ///< spike factor, usually elicited
    double a0 = 1.0;
    double b0 = 1.0;
    std::optional<double> fixed_omega;   ///< if set, omega is held at this value

    void validate() const {
        detail::require(a > 0.0, "NBPSS: a must be positive");
        detail::require(b > 0.0, "NBPSS: b must be positive");
        detail::require(r > 0.0 && r < 1.0, "NBPSS: r must lie in (0, 1)");
        detail::require(a0 > 0.0 && b0 > 0.0, "NBPSS: a0 and b0 must be positive");
        if (fixed_omega) detail::require(*fixed_omega > 0.0 && *fixed_omega <= 1.0, "NBPSS: fixed omega must lie in (0, 1]");
    }

    double slab_weight() const { return a0 / (a0 + b0); }
};

/// Selection state of one effect.
struct NbpssState {
    double tau2 = 1.0;
    double psi2 = 1.0;
    int delta = 1;
    double omega = 0.5;
    std::optional<std::string> omega_group;

    /// r(delta): r under the spike, 1 under the slab.
    double r_of_delta(double r) const { return delta == 1 ? 1.0 : r; }
};

// ---------------------------------------------------------------------------
// Closed-form densities

/// log density of BP(shape1, shape2, scale): scale * Z / (1 - Z), Z ~ Beta(shape1, shape2).
inline double scaled_beta_prime_logpdf(double x, double shape1, double shape2, double scale) {
    detail::require(x > 0.0 && shape1 > 0.0 && shape2 > 0.0 && scale > 0.0,
                    "scaled beta prime: arguments must be positive");
    const double z = x / scale;
    return (shape1 - 1.0) * std::log(z) - (shape1 + shape2) * std::log1p(z) - std::log(scale) -
           (std::lgamma(shape1) + std::lgamma(shape2) - std::lgamma(shape1 + shape2));
}

inline double scaled_beta_prime_cdf(double x, double shape1, double shape2, double scale) {
    if (x <= 0.0) return 0.0;
    return boost::math::ibeta(shape1, shape2, x / (x + scale));
}

/// log of the slab/spike mixture w BP(1/2, a, 2b) + (1 - w) BP(1/2, a, 2rb), w = a0/(a0+b0).
inline double marginal_tau2_logpdf(double tau2, const NbpssHyper& h) {
    detail::require(tau2 > 0.0, "marginal tau2 density: tau2 must be positive");
    const double w = h.fixed_omega.value_or(h.slab_weight());
    const double slab = std::log(w) + scaled_beta_prime_logpdf(tau2, 0.5, h.a, 2.0 * h.b);
    if (w >= 1.0) return slab;
    const double spike = std::log1p(-w) + scaled_beta_prime_logpdf(tau2, 0.5, h.a, 2.0 * h.r * h.b);
    const double m = std::max(slab, spike);
    return m + std::log(std::exp(slab - m) + std::exp(spike - m));
}

inline double marginal_tau2_cdf(double tau2, const NbpssHyper& h) {
    const double w = h.fixed_omega.value_or(h.slab_weight());
    return w * scaled_beta_prime_cdf(tau2, 0.5, h.a, 2.0 * h.b) +
           (1.0 - w) * scaled_beta_prime_cdf(tau2, 0.5, h.a, 2.0 * h.r * h.b);
}

/** log density of the signed importance parameter tau: a mixture of scaled t
 * distributions with 2a degrees of freedom and squared scales b/a, rb/a. */
inline double importance_logpdf(double tau, const NbpssHyper& h) {
    const double w = h.fixed_omega.value_or(h.slab_weight());
    auto t_log = [&](double scale_b) {
        // t_{2a}(0, scale^2 = scale_b / a)
        return std::lgamma(h.a + 0.5) - std::lgamma(h.a) - 0.5 * std::log(2.0 * M_PI * scale_b) -
               (h.a + 0.5) * std::log1p(tau * tau / (2.0 * scale_b));
    };
    const double slab = std::log(w) + t_log(h.b);
    if (w >= 1.0) return slab;
    const double spike = std::log1p(-w) + t_log(h.r * h.b);
    const double m = std::max(slab, spike);
    return m + std::log(std::exp(slab - m) + std::exp(spike - m));
}

// ---------------------------------------------------------------------------
// Marginal of beta = tau * beta_tilde by quadrature over tau

/** Support geometry of the constrained Gaussian N(0, K^-) restricted to
 * A beta = 0: an orthonormal basis of the admissible subspace and the log
 * determinant of the precision on it. Computed once per block. */
struct ConstrainedPrior {
    Matrix K;
    Matrix subspace;        ///< D x m orthonormal basis of null(A)
    double log_det = 0.0;   ///< log |N' K N|
    Matrix A;

    Index dim() const { return subspace.cols(); }

    static ConstrainedPrior from(const PenaltyMatrix& penalty, const ConstraintMatrix& constraint) {
        ConstrainedPrior cp;
        cp.K = penalty.dense();
        cp.A = constraint.A;
        const Index d = cp.K.rows();
        if (constraint.empty()) {
            cp.subspace = Matrix::Identity(d, d);
        } else {
            cp.subspace = symmetric_spectrum(constraint.A.transpose() * constraint.A).kernel_basis;
        }
        const Matrix m = cp.subspace.transpose() * cp.K * cp.subspace;
        Eigen::LLT<Matrix> llt(m);
        detail::require_numeric(llt.info() == Eigen::Success && cp.dim() > 0,
                                "prior on the constrained subspace is not proper (constraint must remove ker K)");
        cp.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        return cp;
    }
};

namespace detail {

struct TauIntegral {
    double log_value;    ///< log int g(u) du
    double inv_tau2;     ///< int g(u) e^{-2u} du / int g(u) du
};

/** Integrate g(u) = p(e^u) N_m(beta; 0, e^{2u} K^-) e^u over u = log tau,
 * doubled for the negative half-line, in log-shifted form. */
inline TauIntegral integrate_over_tau(double quad_form, Index m, double log_det, const NbpssHyper& h) {
    const double md = static_cast<double>(m);
    const double log_norm = std::log(2.0) - 0.5 * md * std::log(2.0 * M_PI) + 0.5 * log_det;
    auto log_g = [&](double u) {
        return importance_logpdf(std::exp(u), h) - 0.5 * quad_form * std::exp(-2.0 * u) - (md - 1.0) * u;
    };
    // locate the bulk on a coarse grid
    constexpr double lo = -80.0, hi = 80.0, step = 0.25;
    double best = -std::numeric_limits<double>::infinity();
    for (double u = lo; u <= hi; u += step) best = std::max(best, log_g(u));
    constexpr double window = 60.0;
    double ulo = hi, uhi = lo;
    for (double u = lo; u <= hi; u += step) {
        if (log_g(u) > best - window) {
            ulo = std::min(ulo, u - step);
            uhi = std::max(uhi, u + step);
        }
    }
    require_numeric(ulo > lo && uhi < hi, "marginal beta density: integrand mass reaches the quadrature bounds");
    using Gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    double err0 = 0.0, err1 = 0.0;
    const double i0 = Gk::integrate([&](double u) { return std::exp(log_g(u) - best); }, ulo, uhi, 20, 1e-12, &err0);
    const double i1 =
        Gk::integrate([&](double u) { return std::exp(log_g(u) - best - 2.0 * u); }, ulo, uhi, 20, 1e-12, &err1);
    require_numeric(i0 > 0.0 && err0 <= 1e-8 * i0, "marginal beta density: quadrature did not converge");
    require_numeric(err1 <= 1e-8 * std::fabs(i1) + 1e-300, "marginal beta score: quadrature did not converge");
    return {log_norm + best + std::log(i0), i1 / i0};
}

inline void check_constraint(const Vector& beta, const Matrix& a) {
    if (a.rows() == 0) return;
    const double resid = (a * beta).cwiseAbs().maxCoeff();
    require(resid <= 1e-8, "beta violates the constraint A beta = 0 (residual " + std::to_string(resid) + ")");
}

} // namespace detail

/** log p(beta) with beta = tau * beta_tilde, beta_tilde ~ N(0, K^-) on {A beta = 0}
 * and tau from the scaled-t mixture. Returns +inf at beta = 0 (infinite spike). */
inline double marginal_beta_logpdf(const Vector& beta, const ConstrainedPrior& prior, const NbpssHyper& h) {
    detail::check_constraint(beta, prior.A);
    const double qf = beta.dot(prior.K * beta);
    if (qf <= 0.0) return std::numeric_limits<double>::infinity();
    return detail::integrate_over_tau(qf, prior.dim(), prior.log_det, h).log_value;
}

inline double marginal_beta_logpdf(const Vector& beta, const PenaltyMatrix& penalty, const ConstraintMatrix& constraint,
                                   const NbpssHyper& h) {
    return marginal_beta_logpdf(beta, ConstrainedPrior::from(penalty, constraint), h);
}

/** Gradient of marginal_beta_logpdf on the admissible subspace:
 * -E[1 / tau^2 | beta] * K beta, the expectation taken under the tau integrand. */
inline Vector score_beta(const Vector& beta, const ConstrainedPrior& prior, const NbpssHyper& h) {
    detail::check_constraint(beta, prior.A);
    const Vector kb = prior.K * beta;
    const double qf = beta.dot(kb);
    detail::require_numeric(qf > 0.0, "score is unbounded at beta = 0");
    const auto ti = detail::integrate_over_tau(qf, prior.dim(), prior.log_det, h);
    const Vector projected = prior.subspace * (prior.subspace.transpose() * kb);
    return -ti.inv_tau2 * projected;
}

inline Vector score_beta(const Vector& beta, const PenaltyMatrix& penalty, const ConstraintMatrix& constraint,
                         const NbpssHyper& h) {
    return score_beta(beta, ConstrainedPrior::from(penalty, constraint), h);
}

// ---------------------------------------------------------------------------
// Forward simulation of the hierarchy

struct PriorDraw {
    double omega;
    int delta;
    double psi2;
    double tau2;
};

/// omega ~ Beta(a0, b0), delta ~ Bi(1, omega), psi2 ~ IG(a, b), tau2 ~ Ga(1/2, 1/(2 r(delta) psi2)).
inline PriorDraw draw_hierarchy(const NbpssHyper& h, Rng& rng) {
    PriorDraw d{};
    d.omega = h.fixed_omega ? *h.fixed_omega : rng.beta(h.a0, h.b0);
    d.delta = rng.bernoulli(d.omega) ? 1 : 0;
    d.psi2 = rng.inverse_gamma(h.a, h.b);
    const double rd = d.delta == 1 ? 1.0 : h.r;
    d.tau2 = rng.gamma(0.5, 1.0 / (2.0 * rd * d.psi2));
    return d;
}

} // namespace nbpss
