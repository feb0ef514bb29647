#pragma once

#include "errors.hpp"
#include "rng.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <cfloat>
#include <cmath>
#include <string>

namespace nbpss {

/** GIG(p, q, c) with density proportional to x^(p-1) exp(-(q x + c / x) / 2). */
struct GigParams {
    double p = 1.0;
    double q = 1.0;
    double c = 0.0;

    void validate() const {
        detail::require(std::isfinite(p) && std::isfinite(q) && std::isfinite(c), "GIG: non-finite parameter");
        detail::require(q > 0.0, "GIG: q must be positive");
        detail::require(c >= 0.0, "GIG: c must be non-negative");
        detail::require(c > 0.0 || p > 0.0, "GIG: c = 0 requires p > 0");
    }

    /// Exact moment E[X^k] from the Bessel-function ratio (c > 0).
    double moment(int k) const {
        const double omega = std::sqrt(q * c);
        const double eta = std::sqrt(c / q);
        using boost::math::cyl_bessel_k;
        return std::pow(eta, k) * cyl_bessel_k(p + k, omega) / cyl_bessel_k(p, omega);
    }
};

namespace detail {

inline double gig_mode(double lambda, double omega) {
    if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// The three generators below draw Y with density ~ y^(lambda-1) exp(-omega/2 (y + 1/y)), lambda >= 0.

// Ratio-of-uniforms without mode shift.
inline double gig_rou_noshift(double lambda, double omega, Rng& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
    const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
    for (;;) {
        const double u = um * rng.uniform();
        const double v = rng.uniform();
        const double x = u / v;
        if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
}

// Rejection from a three-piece hat for lambda < 1, omega <= 1 (concave case).
inline double gig_concave(double lambda, double omega, Rng& rng) {
    const double xm = gig_mode(lambda, omega);
    const double x0 = omega / (1.0 - lambda);
    const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
    double a0 = k0 * x0;
    double k1, a1, k2, a2;
    if (x0 >= 2.0 / omega) {
        k1 = 0.0;
        a1 = 0.0;
        k2 = std::pow(x0, lambda - 1.0);
        a2 = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
    } else {
        k1 = std::exp(-omega);
        a1 = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                           : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
        k2 = std::pow(2.0 / omega, lambda - 1.0);
        a2 = k2 * 2.0 * std::exp(-1.0) / omega;
    }
    const double atot = a0 + a1 + a2;
    for (;;) {
        double v = atot * rng.uniform();
        double x, hx;
        if (v <= a0) {
            x = x0 * v / a0;
            hx = k0;
        } else if ((v -= a0) <= a1) {
            if (lambda == 0.0) {
                x = omega * std::exp(std::exp(omega) * v);
                hx = k1 / x;
            } else {
                x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
                hx = k1 * std::pow(x, lambda - 1.0);
            }
        } else {
            v -= a1;
            const double a = std::max(x0, 2.0 / omega);
            x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * a) - omega / (2.0 * k2) * v);
            hx = k2 * std::exp(-omega / 2.0 * x);
        }
        const double u = rng.uniform() * hx;
        if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
    }
}

// Ratio-of-uniforms with mode shift (Dagpunar-Lehner), for lambda > 2 or omega > 3.
inline double gig_rou_shift(double lambda, double omega, Rng& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    const double a = -(2.0 * (lambda + 1.0) / omega + xm);
    const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
    const double c = xm;
    const double p = b - a * a / 3.0;
    const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
    const double fak = 2.0 * std::sqrt(-p / 3.0);
    const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
    const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * boost::math::constants::pi<double>()) - a / 3.0;
    const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
    const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);
    for (;;) {
        const double u = uminus + rng.uniform() * (uplus - uminus);
        const double v = rng.uniform();
        const double x = u / v + xm;
        if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
}

} // namespace detail

/** One exact draw from GIG(p, q, c).
 *
 * Negative p uses X ~ GIG(p, q, c) <=> 1/X ~ GIG(-p, c, q), so the generators
 * only ever see a non-negative index. c = 0 is the gamma case Ga(p, rate q/2).
 */
inline double gig_sample(const GigParams& g, Rng& rng) {
    g.validate();
    constexpr double ztol = 10.0 * DBL_EPSILON;
    if (g.c == 0.0 || (g.c < ztol && g.p > 0.0)) return rng.gamma(g.p, 0.5 * g.q);
    const double lambda = std::fabs(g.p);
    const double alpha = std::sqrt(g.c / g.q);
    const double omega = std::sqrt(g.q * g.c);
    double y;
    if (lambda > 2.0 || omega > 3.0) {
        y = detail::gig_rou_shift(lambda, omega, rng);
    } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
        y = detail::gig_rou_noshift(lambda, omega, rng);
    } else {
        y = detail::gig_concave(lambda, omega, rng);
    }
    return g.p < 0.0 ? alpha / y : alpha * y;
}

} // namespace nbpss
