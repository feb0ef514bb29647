#pragma once

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace nbpss {

enum class FamilyKind { gaussian, gaussian_locscale, poisson, zip, bivariate_normal };

/** Parametric response distribution with one predictor per parameter.
 *
 * Parameterizations (predictor -> parameter):
 *   gaussian          mu = eta; the variance `sigma2` is a separate sampled quantity
 *   gaussian_locscale mu = eta1, sigma^2 = exp(eta2)
 *   poisson           lambda = exp(eta)
 *   zip               lambda = exp(eta1), pi = logistic(eta2)
 *   bivariate_normal  mu1, mu2 identity; sigma1, sigma2 = exp; rho = eta / sqrt(1 + eta^2)
 */
struct ResponseFamily {
    FamilyKind kind = FamilyKind::gaussian;
    double sigma2 = 1.0;

    int parameter_count() const {
        switch (kind) {
            case FamilyKind::gaussian: return 1;
            case FamilyKind::gaussian_locscale: return 2;
            case FamilyKind::poisson: return 1;
            case FamilyKind::zip: return 2;
            case FamilyKind::bivariate_normal: return 5;
        }
        return 0;
    }

    int response_dim() const { return kind == FamilyKind::bivariate_normal ? 2 : 1; }

    std::vector<std::string> parameter_names() const {
        switch (kind) {
            case FamilyKind::gaussian: return {"mu"};
            case FamilyKind::gaussian_locscale: return {"mu", "sigma2"};
            case FamilyKind::poisson: return {"lambda"};
            case FamilyKind::zip: return {"lambda", "pi"};
            case FamilyKind::bivariate_normal: return {"mu1", "mu2", "sigma1", "sigma2", "rho"};
        }
        return {};
    }

    std::string name() const {
        switch (kind) {
            case FamilyKind::gaussian: return "gaussian";
            case FamilyKind::gaussian_locscale: return "gaussian_locscale";
            case FamilyKind::poisson: return "poisson";
            case FamilyKind::zip: return "zip";
            case FamilyKind::bivariate_normal: return "bivariate_normal";
        }
        return "?";
    }

    bool is_discrete() const { return kind == FamilyKind::poisson || kind == FamilyKind::zip; }

    static ResponseFamily from_name(const std::string& name) {
        for (auto k : {FamilyKind::gaussian, FamilyKind::gaussian_locscale, FamilyKind::poisson, FamilyKind::zip,
                       FamilyKind::bivariate_normal}) {
            ResponseFamily f{k};
            if (f.name() == name) return f;
        }
        throw ConfigError("unknown family '" + name + "'");
    }
};

/// Log-likelihood of one record and its derivatives in one predictor.
struct LikelihoodTerms {
    double logdens = 0.0;
    double grad = 0.0;       ///< d logdens / d eta_which
    double curvature = 0.0;  ///< -d^2 logdens / d eta_which^2 (observed)
    double weight = 0.0;     ///< IWLS weight: Fisher information, or observed curvature clamped
};

inline constexpr double kMinWeight = 1e-6;

namespace detail {

inline double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double logistic(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

inline double log_add_exp(double a, double b) {
    const double m = std::max(a, b);
    if (m == -INFINITY) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline void check_count(double y) {
    require(y >= 0.0 && std::floor(y) == y && std::isfinite(y), "count response must be a non-negative integer");
}

constexpr double kLogTwoPi = 1.8378770664093454836;

} // namespace detail

inline double apply_link(const ResponseFamily& f, int k, double eta) {
    switch (f.kind) {
        case FamilyKind::gaussian: return eta;
        case FamilyKind::gaussian_locscale: return k == 0 ? eta : std::exp(eta);
        case FamilyKind::poisson: return std::exp(eta);
        case FamilyKind::zip: return k == 0 ? std::exp(eta) : detail::logistic(eta);
        case FamilyKind::bivariate_normal:
            if (k < 2) return eta;
            if (k < 4) return std::exp(eta);
            return eta / std::sqrt(1.0 + eta * eta);
    }
    return eta;
}

inline double inverse_link(const ResponseFamily& f, int k, double theta) {
    switch (f.kind) {
        case FamilyKind::gaussian: return theta;
        case FamilyKind::gaussian_locscale: return k == 0 ? theta : std::log(theta);
        case FamilyKind::poisson: return std::log(theta);
        case FamilyKind::zip: return k == 0 ? std::log(theta) : std::log(theta) - std::log1p(-theta);
        case FamilyKind::bivariate_normal:
            if (k < 2) return theta;
            if (k < 4) return std::log(theta);
            return theta / std::sqrt(1.0 - theta * theta);
    }
    return theta;
}

inline void check_response(const ResponseFamily& f, std::span<const double> y) {
    if (static_cast<int>(y.size()) != f.response_dim()) throw ConfigError("response has wrong dimension for " + f.name());
    for (double v : y) detail::require(std::isfinite(v), "non-finite response");
    if (f.is_discrete()) detail::check_count(y[0]);
}

/** Log-density and derivatives with respect to predictor `which`.
 * `eta` holds all predictors of the record. */
inline LikelihoodTerms eval_terms(const ResponseFamily& f, std::span<const double> y, std::span<const double> eta,
                                  int which) {
    check_response(f, y);
    if (static_cast<int>(eta.size()) != f.parameter_count()) throw ConfigError("predictor count mismatch for " + f.name());
    for (double e : eta) {
        if (!std::isfinite(e)) throw NumericError("non-finite predictor in " + f.name());
    }
    detail::require(which >= 0 && which < f.parameter_count(), "parameter index out of range");

    LikelihoodTerms t;
    switch (f.kind) {
        case FamilyKind::gaussian: {
            const double r = y[0] - eta[0];
            t.logdens = -0.5 * (detail::kLogTwoPi + std::log(f.sigma2)) - 0.5 * r * r / f.sigma2;
            t.grad = r / f.sigma2;
            t.curvature = 1.0 / f.sigma2;
            t.weight = t.curvature;
            break;
        }
        case FamilyKind::gaussian_locscale: {
            const double r = y[0] - eta[0];
            const double prec = std::exp(-eta[1]);
            t.logdens = -0.5 * (detail::kLogTwoPi + eta[1]) - 0.5 * r * r * prec;
            if (which == 0) {
                t.grad = r * prec;
                t.curvature = prec;
                t.weight = prec;
            } else {
                t.grad = -0.5 + 0.5 * r * r * prec;
                t.curvature = 0.5 * r * r * prec;
                t.weight = 0.5;
            }
            break;
        }
        case FamilyKind::poisson: {
            const double lambda = std::exp(eta[0]);
            t.logdens = y[0] * eta[0] - lambda - std::lgamma(y[0] + 1.0);
            t.grad = y[0] - lambda;
            t.curvature = lambda;
            t.weight = lambda;
            break;
        }
        case FamilyKind::zip: {
            const double lambda = std::exp(eta[0]);
            const double pi = detail::logistic(eta[1]);
            const double log_pi = -detail::log1pexp(-eta[1]);
            const double log_1mpi = -detail::log1pexp(eta[1]);
            if (y[0] == 0.0) {
                t.logdens = detail::log_add_exp(log_pi, log_1mpi - lambda);
                // posterior probability that the zero came from the count process
                const double p0 = std::exp(log_1mpi - lambda - t.logdens);
                if (which == 0) {
                    t.grad = -lambda * p0;
                    t.curvature = lambda * p0 - lambda * lambda * p0 * (1.0 - p0);
                } else {
                    t.grad = (1.0 - p0) - pi;
                    t.curvature = pi * (1.0 - pi) - p0 * (1.0 - p0);
                }
            } else {
                t.logdens = log_1mpi + y[0] * eta[0] - lambda - std::lgamma(y[0] + 1.0);
                if (which == 0) {
                    t.grad = y[0] - lambda;
                    t.curvature = lambda;
                } else {
                    t.grad = -pi;
                    t.curvature = pi * (1.0 - pi);
                }
            }
            t.weight = std::max(t.curvature, kMinWeight);
            break;
        }
        case FamilyKind::bivariate_normal: {
            const double s1 = std::exp(eta[2]);
            const double s2 = std::exp(eta[3]);
            const double e5 = eta[4];
            const double om = 1.0 / (1.0 + e5 * e5);   // 1 - rho^2
            const double rho = e5 * std::sqrt(om);
            const double z1 = (y[0] - eta[0]) / s1;
            const double z2 = (y[1] - eta[1]) / s2;
            const double q = z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2;
            t.logdens = -detail::kLogTwoPi - eta[2] - eta[3] - 0.5 * std::log(om) - 0.5 * q / om;
            switch (which) {
                case 0:
                    t.grad = (z1 - rho * z2) / (s1 * om);
                    t.curvature = 1.0 / (s1 * s1 * om);
                    t.weight = t.curvature;
                    break;
                case 1:
                    t.grad = (z2 - rho * z1) / (s2 * om);
                    t.curvature = 1.0 / (s2 * s2 * om);
                    t.weight = t.curvature;
                    break;
                case 2:
                    t.grad = -1.0 + (z1 * z1 - rho * z1 * z2) / om;
                    t.curvature = (2.0 * z1 * z1 - rho * z1 * z2) / om;
                    t.weight = (2.0 - rho * rho) / om;
                    break;
                case 3:
                    t.grad = -1.0 + (z2 * z2 - rho * z1 * z2) / om;
                    t.curvature = (2.0 * z2 * z2 - rho * z1 * z2) / om;
                    t.weight = (2.0 - rho * rho) / om;
                    break;
                default: {
                    const double l_rho = rho / om + z1 * z2 / om - q * rho / (om * om);
                    const double l_rhorho =
                        (1.0 + rho * rho + 4.0 * rho * z1 * z2 - q) / (om * om) - 4.0 * rho * rho * q / (om * om * om);
                    const double d1 = om * std::sqrt(om);               // d rho / d eta
                    const double d2 = -3.0 * e5 * om * om * std::sqrt(om);  // d^2 rho / d eta^2
                    t.grad = l_rho * d1;
                    t.curvature = -(l_rhorho * d1 * d1 + l_rho * d2);
                    t.weight = (1.0 + rho * rho) * om;
                    break;
                }
            }
            break;
        }
    }
    t.weight = std::max(t.weight, kMinWeight);
    return t;
}

/// Log-density of one record.
inline double log_density(const ResponseFamily& f, std::span<const double> y, std::span<const double> eta) {
    return eval_terms(f, y, eta, 0).logdens;
}

/// Sum of log-densities; `y` is n x response_dim, `eta` is n x K.
inline double logscore(const ResponseFamily& f, const Matrix& y, const Matrix& eta) {
    detail::require(y.rows() == eta.rows(), "logscore: response and predictor counts differ");
    double total = 0.0;
    std::vector<double> yr(static_cast<std::size_t>(y.cols())), er(static_cast<std::size_t>(eta.cols()));
    for (Index i = 0; i < y.rows(); ++i) {
        for (Index c = 0; c < y.cols(); ++c) yr[c] = y(i, c);
        for (Index c = 0; c < eta.cols(); ++c) er[c] = eta(i, c);
        total += log_density(f, yr, er);
    }
    return total;
}

namespace detail {

inline double count_pmf(const ResponseFamily& f, double y, std::span<const double> eta) {
    const double ys[1] = {y};
    return std::exp(log_density(f, ys, eta));
}

} // namespace detail

/** Overlap integral of two densities of the family, int p_s(y) p_t(y) dy
 * (a sum for count families). Used for quadratic and spherical scores. */
inline double density_overlap(const ResponseFamily& fs, std::span<const double> eta_s, const ResponseFamily& ft,
                              std::span<const double> eta_t) {
    using detail::kLogTwoPi;
    switch (fs.kind) {
        case FamilyKind::gaussian:
        case FamilyKind::gaussian_locscale: {
            const double vs = fs.kind == FamilyKind::gaussian ? fs.sigma2 : std::exp(eta_s[1]);
            const double vt = ft.kind == FamilyKind::gaussian ? ft.sigma2 : std::exp(eta_t[1]);
            const double v = vs + vt;
            const double d = eta_s[0] - eta_t[0];
            return std::exp(-0.5 * (kLogTwoPi + std::log(v)) - 0.5 * d * d / v);
        }
        case FamilyKind::bivariate_normal: {
            auto cov = [](std::span<const double> e) {
                const double s1 = std::exp(e[2]), s2 = std::exp(e[3]);
                const double rho = e[4] / std::sqrt(1.0 + e[4] * e[4]);
                Eigen::Matrix2d c;
                c << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;
                return c;
            };
            const Eigen::Matrix2d c = cov(eta_s) + cov(eta_t);
            const Eigen::Vector2d d(eta_s[0] - eta_t[0], eta_s[1] - eta_t[1]);
            return std::exp(-kLogTwoPi - 0.5 * std::log(c.determinant()) - 0.5 * d.dot(c.inverse() * d));
        }
        case FamilyKind::poisson:
        case FamilyKind::zip: {
            const double ls = std::exp(eta_s[0]), lt = std::exp(eta_t[0]);
            const double top = std::max(ls, lt);
            const auto ymax = static_cast<long>(top + 20.0 * std::sqrt(top) + 50.0);
            double total = 0.0;
            for (long y = 0; y <= ymax; ++y) {
                total += detail::count_pmf(fs, static_cast<double>(y), eta_s) *
                         detail::count_pmf(ft, static_cast<double>(y), eta_t);
            }
            return total;
        }
    }
    return 0.0;
}

/// Draw one response record given all predictors.
inline std::vector<double> sample_response(const ResponseFamily& f, std::span<const double> eta, Rng& rng) {
    switch (f.kind) {
        case FamilyKind::gaussian:
            return {eta[0] + std::sqrt(f.sigma2) * rng.normal()};
        case FamilyKind::gaussian_locscale:
            return {eta[0] + std::exp(0.5 * eta[1]) * rng.normal()};
        case FamilyKind::poisson:
            return {static_cast<double>(boost::random::poisson_distribution<long, double>(std::exp(eta[0]))(rng.engine()))};
        case FamilyKind::zip: {
            if (rng.bernoulli(detail::logistic(eta[1]))) return {0.0};
            return {static_cast<double>(boost::random::poisson_distribution<long, double>(std::exp(eta[0]))(rng.engine()))};
        }
        case FamilyKind::bivariate_normal: {
            const double s1 = std::exp(eta[2]), s2 = std::exp(eta[3]);
            const double rho = eta[4] / std::sqrt(1.0 + eta[4] * eta[4]);
            const double u = rng.normal(), v = rng.normal();
            return {eta[0] + s1 * u, eta[1] + s2 * (rho * u + std::sqrt(1.0 - rho * rho) * v)};
        }
    }
    return {};
}

} // namespace nbpss
