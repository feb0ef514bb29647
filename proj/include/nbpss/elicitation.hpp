#pragma once

#include "design.hpp"
#include "nbpss_prior.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace nbpss {

struct ElicitationTarget {
    double alpha = 0.1;
    double c = 0.1;
    int mc_draws = 10000;
    std::uint64_t seed = 1;

    void validate() const {
        detail::require(alpha > 0.0 && alpha < 0.5, "elicitation: alpha must lie in (0, 0.5)");
        detail::require(c > 0.0, "elicitation: c must be positive");
        detail::require(mc_draws >= 1000, "elicitation: need at least 1000 Monte-Carlo draws");
    }
};

struct ElicitationResult {
    double b = 0.0;
    double r = 0.0;
    double p_slab = 0.0;    ///< P(sup|f| <= c | delta = 1) at the solution
    double p_spike = 0.0;   ///< P(sup|f| <= c | delta = 0) at the solution
};

/** Sup-norm of prior function draws over the observed design rows.
 *
 * Each draw m stores w_m = |z_m| max_i |b_i' beta_m| / sqrt(g_m) with
 * z ~ N(0, 1), g ~ Ga(a, 1) and beta_m ~ N(0, K^-) on {A beta = 0}. For an
 * effective slab scale e = r(delta) b the hierarchy gives
 * sup |f| = sqrt(e) * w_m, so every bisection step reuses the same numbers.
 */
class SupNormSampler {
public:
    SupNormSampler(const EffectBlock& block, double a, int draws, std::uint64_t seed) {
        detail::require(draws >= 1000, "sup-norm simulation: need at least 1000 draws");
        detail::require(a > 0.0, "sup-norm simulation: a must be positive");
        const ConstrainedPrior prior = ConstrainedPrior::from(block.penalty, block.constraint);
        // gamma ~ N(0, M^-1) with M = N'KN, via M = L L', gamma = L^-T z
        const Matrix m = prior.subspace.transpose() * prior.K * prior.subspace;
        Eigen::LLT<Matrix> llt(m);
        detail::require_numeric(llt.info() == Eigen::Success, block.label + ": prior precision not positive definite");
        const Matrix upper = llt.matrixU();

        Rng rng(seed);
        unit_.resize(static_cast<std::size_t>(draws));
        Vector z(prior.dim());
        double largest = 0.0;
        for (int d = 0; d < draws; ++d) {
            const double g = rng.gamma(a, 1.0);
            const double zt = rng.normal();
            for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
            const Vector gamma = upper.triangularView<Eigen::Upper>().solve(z);
            const Vector f = block.B * Vector(prior.subspace * gamma);
            const double sup = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
            unit_[static_cast<std::size_t>(d)] = std::fabs(zt) * sup / std::sqrt(g);
            largest = std::max(largest, sup);
        }
        detail::require_numeric(largest > 0.0, block.label + ": penalized function space is degenerate on the design");
        std::sort(unit_.begin(), unit_.end());
    }

    /// Sorted sup-norm sample at effective scale e = r(delta) * b.
    std::vector<double> sample(double effective_scale) const {
        std::vector<double> out(unit_);
        const double s = std::sqrt(effective_scale);
        for (double& v : out) v *= s;
        return out;
    }

    /// Empirical P(sup |f| <= c) at effective scale e.
    double prob_below(double c, double effective_scale) const {
        const double cut = c / std::sqrt(effective_scale);
        const auto it = std::upper_bound(unit_.begin(), unit_.end(), cut);
        return static_cast<double>(it - unit_.begin()) / static_cast<double>(unit_.size());
    }

    std::size_t size() const { return unit_.size(); }

private:
    std::vector<double> unit_;
};

/// Sorted sup-norm sample under delta (effective scale b when delta = 1, r b otherwise).
inline std::vector<double> simulate_sup_norm(const EffectBlock& block, double a, double b, double r, int delta, int draws,
                                             std::uint64_t seed) {
    detail::require(b > 0.0 && (delta == 1 || (r > 0.0 && r <= 1.0)), "sup-norm simulation: need b > 0 and r in (0, 1]");
    return SupNormSampler(block, a, draws, seed).sample(delta == 1 ? b : r * b);
}

namespace detail {

/// Bisection on log scale for prob_below(c, exp(x)) = target on [lo, hi].
inline double bisect_log_scale(const SupNormSampler& s, double c, double target, double lo, double hi,
                               const char* what) {
    auto f = [&](double x) { return s.prob_below(c, std::exp(x)) - target; };
    // probability decreases in the scale
    require_numeric(f(lo) >= 0.0 && f(hi) <= 0.0, std::string(what) + ": root not bracketed");
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) lo = mid; else hi = mid;
    }
    // the empirical probability is a step function; take the side closer to the target
    const double x = std::fabs(f(lo)) <= std::fabs(f(hi)) ? lo : hi;
    require_numeric(std::fabs(f(x)) <= 0.005, std::string(what) + ": Monte-Carlo probability not within 0.005 of target");
    return x;
}

} // namespace detail

/// Slab scale b from P(sup|f| <= c | delta = 1) = alpha.
inline double solve_b(const SupNormSampler& s, const ElicitationTarget& t) {
    t.validate();
    return std::exp(detail::bisect_log_scale(s, t.c, t.alpha, -30.0, 30.0, "solve_b"));
}

/// Spike factor r from P(sup|f| <= c | delta = 0) = 1 - alpha at effective scale r * b.
inline double solve_r(const SupNormSampler& s, const ElicitationTarget& t, double b_solved) {
    t.validate();
    detail::require(b_solved > 0.0, "solve_r: b must be positive");
    const double lo = std::log(1e-12), hi = 0.0;
    auto f = [&](double x) { return s.prob_below(t.c, std::exp(x) * b_solved) - (1.0 - t.alpha); };
    detail::require_numeric(f(lo) >= 0.0 && f(hi) <= 0.0, "solve_r: r outside (1e-12, 1)");
    double a = lo, z = hi;
    for (int it = 0; it < 200 && z - a > 1e-12; ++it) {
        const double mid = 0.5 * (a + z);
        if (f(mid) > 0.0) a = mid; else z = mid;
    }
    const double x = std::fabs(f(a)) <= std::fabs(f(z)) ? a : z;
    detail::require_numeric(std::fabs(f(x)) <= 0.005, "solve_r: Monte-Carlo probability not within 0.005 of target");
    const double r = std::exp(x);
    detail::require_numeric(r > 1e-12 && r < 1.0, "solve_r: r outside (1e-12, 1)");
    return r;
}

/// Both hyperparameters for one block from a single set of common random numbers.
inline ElicitationResult elicit(const EffectBlock& block, double a, const ElicitationTarget& t) {
    t.validate();
    SupNormSampler s(block, a, t.mc_draws, t.seed);
    ElicitationResult out;
    out.b = solve_b(s, t);
    out.r = solve_r(s, t, out.b);
    out.p_slab = s.prob_below(t.c, out.b);
    out.p_spike = s.prob_below(t.c, out.r * out.b);
    return out;
}

} // namespace nbpss
