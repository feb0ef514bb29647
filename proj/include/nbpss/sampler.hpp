#pragma once

#include "gig.hpp"
#include "model.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace nbpss {

// ---------------------------------------------------------------------------
// Sparse proposal precision with a fixed pattern

/** Holds P = B'WB + s K (lower triangle) on a pattern fixed at construction,
 * and its LDL' factor whose ordering is analysed once. */
class BlockWorkspace {
public:
    explicit BlockWorkspace(const EffectBlock& block) : d_(block.dim()) {
        // nonzeros of every design row
        std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<std::size_t>(block.n()));
        if (const SparseMatrix* s = block.B.sparse()) {
            for (Index c = 0; c < s->outerSize(); ++c) {
                for (SparseMatrix::InnerIterator it(*s, c); it; ++it) {
                    if (it.value() != 0.0) rows[static_cast<std::size_t>(it.row())].emplace_back(c, it.value());
                }
            }
        } else {
            const Matrix& m = *block.B.dense();
            for (Index i = 0; i < m.rows(); ++i) {
                for (Index c = 0; c < m.cols(); ++c) {
                    if (m(i, c) != 0.0) rows[static_cast<std::size_t>(i)].emplace_back(c, m(i, c));
                }
            }
        }
        for (auto& r : rows) std::sort(r.begin(), r.end());

        std::vector<Eigen::Triplet<double>> trip;
        for (Index j = 0; j < d_; ++j) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);
        for (const auto& r : rows) {
            for (std::size_t a = 0; a < r.size(); ++a) {
                for (std::size_t b = 0; b <= a; ++b) trip.emplace_back(static_cast<int>(r[a].first), static_cast<int>(r[b].first), 1.0);
            }
        }
        const SparseMatrix& k = block.penalty.K;
        for (Index c = 0; c < k.outerSize(); ++c) {
            for (SparseMatrix::InnerIterator it(k, c); it; ++it) {
                if (it.row() >= it.col()) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), 1.0);
            }
        }
        p_.resize(d_, d_);
        p_.setFromTriplets(trip.begin(), trip.end());
        p_.makeCompressed();

        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            for (std::size_t a = 0; a < r.size(); ++a) {
                for (std::size_t b = 0; b <= a; ++b) {
                    gram_.push_back({static_cast<Index>(i), slot(r[a].first, r[b].first), r[a].second * r[b].second});
                }
            }
        }
        for (Index c = 0; c < k.outerSize(); ++c) {
            for (SparseMatrix::InnerIterator it(k, c); it; ++it) {
                if (it.row() >= it.col() && it.value() != 0.0) penalty_.emplace_back(slot(it.row(), it.col()), it.value());
            }
        }
        ldlt_.analyzePattern(p_);
    }

    Index dim() const { return d_; }

    /// P = B' diag(w) B + k_scale K, then factorize. Throws NumericError naming `label` unless P > 0.
    void assemble_and_factor(const Vector& w, double k_scale, const std::string& label) {
        double* v = p_.valuePtr();
        std::fill(v, v + p_.nonZeros(), 0.0);
        for (const auto& e : gram_) v[e.slot] += w(e.row) * e.coef;
        for (const auto& [s, val] : penalty_) v[s] += k_scale * val;
        ldlt_.factorize(p_);
        bool ok = ldlt_.info() == Eigen::Success;
        if (ok) {
            const Vector& dg = ldlt_.vectorD();
            ok = (dg.array() > 0.0).all() && dg.allFinite();
            if (ok) log_det_ = dg.array().log().sum();
        }
        detail::require_numeric(ok, label + ": Cholesky factorization of the proposal precision failed");
    }

    const SparseMatrix& precision_lower() const { return p_; }
    double log_det() const { return log_det_; }
    Vector solve(const Vector& rhs) const { return ldlt_.solve(rhs); }
    Matrix solve(const Matrix& rhs) const { return ldlt_.solve(rhs); }

    /// x ~ N(0, P^-1): P = Pt' L D L' Pt, so x = Pt' L^-T D^-1/2 z.
    Vector draw_centered(Rng& rng) const {
        Vector z(d_);
        for (Index i = 0; i < d_; ++i) z(i) = rng.normal();
        z.array() /= ldlt_.vectorD().array().sqrt();
        const Vector u = ldlt_.matrixU().solve(z);
        return ldlt_.permutationPinv() * u;
    }

    double quad(const Vector& x) const { return x.dot(p_.selfadjointView<Eigen::Lower>() * x); }

private:
    struct GramEntry {
        Index row;
        Index slot;
        double coef;
    };

    Index slot(Index r, Index c) const {
        if (r < c) std::swap(r, c);
        const int* inner = p_.innerIndexPtr();
        const int* begin = inner + p_.outerIndexPtr()[c];
        const int* end = inner + p_.outerIndexPtr()[c + 1];
        const int* it = std::lower_bound(begin, end, static_cast<int>(r));
        return static_cast<Index>(it - inner);
    }

    Index d_;
    SparseMatrix p_;
    std::vector<GramEntry> gram_;
    std::vector<std::pair<Index, double>> penalty_;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt_;
    double log_det_ = 0.0;
};

/** N(P^-1 rhs, P^-1) restricted to A x = 0, for a factored workspace. */
class ConstrainedGaussian {
public:
    ConstrainedGaussian(const BlockWorkspace& ws, const Vector& rhs, const Matrix& a) : ws_(ws), a_(a) {
        mean_ = ws.solve(rhs);
        if (a.rows() > 0) {
            pinv_at_ = ws.solve(Matrix(a.transpose()));
            const Matrix s = a * pinv_at_;
            s_llt_.compute(s);
            detail::require_numeric(s_llt_.info() == Eigen::Success, "constraint matrix is rank deficient");
            log_det_s_ = 2.0 * s_llt_.matrixLLT().diagonal().array().log().sum();
            mean_ = project(mean_);
        }
    }

    /// Conditioning by kriging: x - P^-1 A' (A P^-1 A')^-1 A x, applied twice to remove rounding.
    Vector project(Vector x) const {
        if (a_.rows() == 0) return x;
        for (int pass = 0; pass < 2; ++pass) x -= pinv_at_ * s_llt_.solve(Vector(a_ * x));
        return x;
    }

    Vector draw(Rng& rng) const {
        return project(Vector(mean_ + ws_.draw_centered(rng)));
    }

    /// log density on the constraint subspace up to a constant shared by all proposals of the block.
    double log_density(const Vector& x) const {
        const Vector r = x - mean_;
        return 0.5 * ws_.log_det() + 0.5 * log_det_s_ - 0.5 * ws_.quad(r);
    }

    const Vector& mean() const { return mean_; }

private:
    const BlockWorkspace& ws_;
    const Matrix& a_;
    Vector mean_;
    Matrix pinv_at_;
    Eigen::LLT<Matrix> s_llt_;
    double log_det_s_ = 0.0;
};

/** One draw from N(P^-1 rhs, P^-1) conditional on A beta = 0 for a
 * stand-alone precision (dense input, used outside the chain). */
inline Vector sample_constrained_gaussian(const Matrix& precision, const Vector& rhs, const Matrix& a, Rng& rng) {
    detail::require(precision.rows() == precision.cols() && precision.rows() == rhs.size(),
                    "constrained Gaussian: dimension mismatch");
    detail::require(a.rows() == 0 || a.cols() == rhs.size(), "constrained Gaussian: constraint has wrong width");
    EffectBlock b;
    b.label = "gaussian";
    b.B = DesignMatrix(Matrix(Matrix::Zero(0, rhs.size())));
    b.penalty = make_penalty(precision.sparseView(0.0, 0.0), PenaltyKind::identity);
    BlockWorkspace ws(b);
    ws.assemble_and_factor(Vector(), 1.0, b.label);
    ConstrainedGaussian g(ws, rhs, a);
    return g.draw(rng);
}

// ---------------------------------------------------------------------------
// Gibbs steps

/// GIG full conditional of tau^2 for a selected block of prior dimension m.
inline GigParams tau2_selected_params(Index m, double quad_form, const NbpssState& s, const NbpssHyper& h) {
    return {-0.5 * static_cast<double>(m) + 0.5, 1.0 / (s.r_of_delta(h.r) * s.psi2), quad_form};
}

inline double update_tau2_selected(Index m, double quad_form, const NbpssState& s, const NbpssHyper& h, Rng& rng) {
    return gig_sample(tau2_selected_params(m, quad_form, s, h), rng);
}

/// IG(shape, scale) full conditional of an unselected smoothing variance.
inline std::pair<double, double> tau2_unselected_params(Index m, double quad_form, double a, double b) {
    return {0.5 * static_cast<double>(m) + a, 0.5 * quad_form + b};
}

inline double update_tau2_unselected(Index m, double quad_form, double a, double b, Rng& rng) {
    const auto [shape, scale] = tau2_unselected_params(m, quad_form, a, b);
    detail::require(shape > 0.0 && scale > 0.0, "IG smoothing variance: updated parameters must be positive");
    return rng.inverse_gamma(shape, scale);
}

/// P(delta = 1 | .) = 1 / (1 + (1 - omega)/omega * L), in log space.
inline double delta_inclusion_probability(double tau2, double psi2, double omega, double r) {
    if (omega >= 1.0) return 1.0;
    if (omega <= 0.0) return 0.0;
    const double log_l = -0.5 * std::log(r) - tau2 / (2.0 * psi2) * (1.0 / r - 1.0);
    const double x = std::log1p(-omega) - std::log(omega) + log_l;
    return detail::logistic(-x);
}

inline int update_delta(const NbpssState& s, const NbpssHyper& h, Rng& rng) {
    return rng.uniform() < delta_inclusion_probability(s.tau2, s.psi2, s.omega, h.r) ? 1 : 0;
}

inline std::pair<double, double> psi2_params(const NbpssState& s, const NbpssHyper& h) {
    return {h.a + 0.5, h.b + s.tau2 / (2.0 * s.r_of_delta(h.r))};
}

inline double update_psi2(const NbpssState& s, const NbpssHyper& h, Rng& rng) {
    const auto [shape, scale] = psi2_params(s, h);
    return rng.inverse_gamma(shape, scale);
}

/// Beta(a0 + sum delta, b0 + L - sum delta) for a group of L effects.
inline std::pair<double, double> omega_params(double a0, double b0, int sum_delta, int group_size) {
    return {a0 + sum_delta, b0 + (group_size - sum_delta)};
}

inline double update_omega(const std::vector<int>& deltas, const NbpssHyper& h, double current, Rng& rng) {
    if (h.fixed_omega) return current;
    int sum = 0;
    for (int d : deltas) sum += d;
    const auto [p, q] = omega_params(h.a0, h.b0, sum, static_cast<int>(deltas.size()));
    return rng.beta(p, q);
}

// ---------------------------------------------------------------------------
// Chain configuration and output

struct ChainConfig {
    long iterations = 12000;
    long burn_in = 2000;
    long thin = 10;
    std::uint64_t seed = 1;
    bool mh_correction = true;
    std::vector<std::pair<int, int>> update_order;   ///< (predictor, block); empty means declaration order

    void validate() const {
        detail::require(iterations >= 0 && burn_in >= 0, "chain: iterations and burn-in must be non-negative");
        detail::require(iterations == 0 || burn_in < iterations, "chain: burn-in must be smaller than iterations");
        detail::require(thin >= 1, "chain: thin must be at least 1");
    }

    long kept() const { return iterations <= burn_in ? 0 : (iterations - burn_in + thin - 1) / thin; }
};

/// Column positions of one block in the draws matrix; -1 when absent.
struct BlockColumns {
    int predictor = 0;
    int block = 0;
    std::string label;
    std::string term;
    Index beta = 0;
    Index dim = 0;
    Index tau2 = -1;
    Index psi2 = -1;
    Index delta = -1;
    Index omega = -1;
};

struct DrawLayout {
    std::vector<std::string> names;
    std::vector<BlockColumns> blocks;
    Index sigma2 = -1;

    const BlockColumns* find(const std::string& label) const {
        for (const auto& b : blocks) {
            if (b.label == label) return &b;
        }
        return nullptr;
    }
};

/** Column order: per predictor, per block: beta[0..D), tau2, psi2, delta, omega
 * (the last three for selected blocks only); then sigma2 for a Gaussian model
 * with sampled variance. Names are "<parameter>:<label>:<quantity>". */
inline DrawLayout draw_layout(const Model& m) {
    DrawLayout l;
    for (std::size_t k = 0; k < m.predictors.size(); ++k) {
        const auto& pred = m.predictors[k];
        for (std::size_t j = 0; j < pred.blocks.size(); ++j) {
            const auto& bs = pred.blocks[j];
            BlockColumns c;
            c.predictor = static_cast<int>(k);
            c.block = static_cast<int>(j);
            c.label = bs.block.label;
            c.term = bs.term.empty() ? bs.block.label : bs.term;
            c.dim = bs.block.dim();
            const std::string pre = pred.name + ":" + bs.block.label + ":";
            c.beta = static_cast<Index>(l.names.size());
            for (Index d = 0; d < c.dim; ++d) l.names.push_back(pre + "beta[" + std::to_string(d) + "]");
            if (bs.block.prior_kind != PriorKind::flat_unpenalized) {
                c.tau2 = static_cast<Index>(l.names.size());
                l.names.push_back(pre + "tau2");
            }
            if (bs.block.prior_kind == PriorKind::nbpss) {
                c.psi2 = static_cast<Index>(l.names.size());
                l.names.push_back(pre + "psi2");
                c.delta = static_cast<Index>(l.names.size());
                l.names.push_back(pre + "delta");
                c.omega = static_cast<Index>(l.names.size());
                l.names.push_back(pre + "omega");
            }
            l.blocks.push_back(std::move(c));
        }
    }
    if (m.family.kind == FamilyKind::gaussian && !m.fixed_variance) {
        l.sigma2 = static_cast<Index>(l.names.size());
        l.names.push_back("sigma2");
    }
    return l;
}

struct ChainOutput {
    DrawLayout layout;
    Matrix draws;                           ///< kept iterations x columns
    std::vector<double> acceptance;         ///< per block, in layout order
    std::vector<double> max_abs_log_ratio;  ///< per block, largest |log MH ratio| seen
    double max_constraint_residual = 0.0;   ///< over all stored draws
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    bool approximate = false;               ///< true when the MH correction was disabled

    Index size() const { return draws.rows(); }
};

// ---------------------------------------------------------------------------
// Sampler

/** Metropolis-within-Gibbs sampler for one chain. The model must outlive it. */
class Sampler {
public:
    Sampler(const Model& model, const ChainConfig& cfg, std::uint64_t stream = 0)
        : model_(model), cfg_(cfg), rng_(cfg.seed, stream), stream_(stream), family_(model.family),
          layout_(draw_layout(model)) {
        model.validate();
        cfg.validate();
        const Index n = model.n();
        const int kpar = static_cast<int>(model.predictors.size());
        eta_ = RowMatrix::Zero(n, kpar);
        std::map<std::string, std::size_t> group_slot;
        for (int k = 0; k < kpar; ++k) {
            for (const auto& bs : model.predictors[static_cast<std::size_t>(k)].blocks) {
                Block b;
                b.spec = &bs;
                b.predictor = k;
                b.ws = std::make_unique<BlockWorkspace>(bs.block);
                b.beta = Vector::Zero(bs.block.dim());
                b.fit = Vector::Zero(n);
                if (bs.block.prior_kind != PriorKind::flat_unpenalized) {
                    b.m = ConstrainedPrior::from(bs.block.penalty, bs.block.constraint).dim();
                }
                if (bs.block.prior_kind == PriorKind::nbpss) {
                    const NbpssHyper& h = bs.hyper;
                    b.sel.psi2 = h.a > 1.0 ? h.b / (h.a - 1.0) : h.b;
                    b.sel.tau2 = b.sel.psi2;
                    b.sel.delta = 1;
                    const double w0 = h.fixed_omega.value_or(h.slab_weight());
                    if (bs.omega_group) {
                        auto [it, fresh] = group_slot.emplace(*bs.omega_group, omegas_.size());
                        if (fresh) {
                            omegas_.push_back(w0);
                            group_members_.emplace_back();
                        }
                        b.omega_slot = it->second;
                    } else {
                        b.omega_slot = omegas_.size();
                        omegas_.push_back(w0);
                        group_members_.emplace_back();
                    }
                    group_members_[b.omega_slot].push_back(blocks_.size());
                    b.tau2 = b.sel.tau2;
                } else if (bs.block.prior_kind == PriorKind::inverse_gamma_smoothing) {
                    b.tau2 = 1.0;
                }
                blocks_.push_back(std::move(b));
            }
        }
        if (cfg.update_order.empty()) {
            for (std::size_t i = 0; i < blocks_.size(); ++i) order_.push_back(i);
        } else {
            for (const auto& [k, j] : cfg.update_order) {
                std::size_t idx = 0;
                bool found = false;
                for (std::size_t i = 0; i < blocks_.size(); ++i) {
                    if (blocks_[i].predictor == k && blocks_[i].spec == &model.predictors.at(static_cast<std::size_t>(k)).blocks.at(static_cast<std::size_t>(j))) {
                        idx = i;
                        found = true;
                    }
                }
                detail::require(found, "chain: update order names an unknown block");
                order_.push_back(idx);
            }
        }
        if (family_.kind == FamilyKind::gaussian && !model.fixed_variance) {
            const double mean = model.y.col(0).mean();
            const double var = n > 1 ? (model.y.col(0).array() - mean).square().sum() / static_cast<double>(n - 1) : 1.0;
            family_.sigma2 = var > 0.0 ? var : 1.0;
        }
        accepted_.assign(blocks_.size(), 0);
        proposed_.assign(blocks_.size(), 0);
        max_log_ratio_.assign(blocks_.size(), 0.0);
    }

    /// One full sweep in the configured block order.
    void sweep() {
        recompute_eta();
        for (std::size_t idx : order_) {
            Block& b = blocks_[idx];
            try {
                update_beta(idx);
                update_variance(b);
                if (b.spec->block.prior_kind == PriorKind::nbpss) update_selection(b);
            } catch (const NumericError& e) {
                throw NumericError("iteration " + std::to_string(iteration_) + ", block '" + b.spec->block.label +
                                   "': " + e.what());
            }
        }
        if (family_.kind == FamilyKind::gaussian && !model_.fixed_variance) update_sigma2();
        ++iteration_;
    }

    /// Runs the configured chain and returns the thinned post-burn-in draws.
    ChainOutput run() {
        ChainOutput out;
        out.layout = layout_;
        out.seed = cfg_.seed;
        out.stream = stream_;
        out.approximate = !cfg_.mh_correction;
        out.draws.resize(cfg_.kept(), static_cast<Index>(layout_.names.size()));
        Index row = 0;
        for (long it = 0; it < cfg_.iterations; ++it) {
            sweep();
            if (it >= cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0) {
                store(out, row++);
            }
        }
        out.acceptance.resize(blocks_.size());
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            out.acceptance[i] = proposed_[i] ? static_cast<double>(accepted_[i]) / static_cast<double>(proposed_[i]) : 0.0;
        }
        out.max_abs_log_ratio = max_log_ratio_;
        return out;
    }

    // state access for tests and diagnostics
    std::size_t block_count() const { return blocks_.size(); }
    const Vector& beta(std::size_t i) const { return blocks_[i].beta; }
    double tau2(std::size_t i) const { return blocks_[i].tau2; }
    NbpssState selection(std::size_t i) const {
        NbpssState s = blocks_[i].sel;
        if (blocks_[i].spec->block.prior_kind == PriorKind::nbpss) s.omega = omegas_[blocks_[i].omega_slot];
        return s;
    }
    double sigma2() const { return family_.sigma2; }
    const RowMatrix& eta() { recompute_eta(); return eta_; }
    Rng& rng() { return rng_; }
    double acceptance(std::size_t i) const {
        return proposed_[i] ? static_cast<double>(accepted_[i]) / static_cast<double>(proposed_[i]) : 0.0;
    }
    double max_abs_log_ratio(std::size_t i) const { return max_log_ratio_[i]; }

    /// Overwrite the state of block i (beta must satisfy the constraint).
    void set_block(std::size_t i, const Vector& beta, double tau2, std::optional<NbpssState> sel = std::nullopt) {
        Block& b = blocks_[i];
        b.beta = beta;
        b.fit = b.spec->block.B * beta;
        b.tau2 = tau2;
        if (sel) {
            b.sel = *sel;
            b.sel.tau2 = tau2;
            if (b.spec->block.prior_kind == PriorKind::nbpss) omegas_[b.omega_slot] = sel->omega;
        }
    }
    void set_sigma2(double s2) { family_.sigma2 = s2; }

    /// Replace the response; the model's own response is left untouched.
    void set_response(const RowMatrix& y) {
        detail::require(y.rows() == model_.n() && y.cols() == model_.y.cols(), "sampler: response shape mismatch");
        y_override_ = y;
    }

private:
    struct Block {
        const BlockSpec* spec = nullptr;
        int predictor = 0;
        std::unique_ptr<BlockWorkspace> ws;
        Vector beta;
        Vector fit;
        double tau2 = 0.0;
        NbpssState sel;
        Index m = 0;
        std::size_t omega_slot = 0;
    };

    const RowMatrix& response() const { return y_override_ ? *y_override_ : model_.y; }

    void recompute_eta() {
        eta_.setZero();
        for (const auto& b : blocks_) eta_.col(b.predictor) += b.fit;
    }

    /// Log-likelihood at the current eta and the IWLS pieces for predictor k.
    double evaluate(int k, Vector& grad, Vector& weight) const {
        const RowMatrix& y = response();
        const Index n = y.rows();
        const auto yc = static_cast<std::size_t>(y.cols());
        const auto ec = static_cast<std::size_t>(eta_.cols());
        grad.resize(n);
        weight.resize(n);
        double ll = 0.0;
        for (Index i = 0; i < n; ++i) {
            const LikelihoodTerms t = eval_terms(family_, std::span<const double>(y.data() + i * y.cols(), yc),
                                                 std::span<const double>(eta_.data() + i * eta_.cols(), ec), k);
            ll += t.logdens;
            grad(i) = t.grad;
            weight(i) = std::max(t.weight, kMinWeight);
        }
        detail::require_numeric(std::isfinite(ll), "non-finite log-likelihood");
        return ll;
    }

    double log_prior(const Block& b, const Vector& beta) const {
        if (b.spec->block.prior_kind == PriorKind::flat_unpenalized) return 0.0;
        return -0.5 * beta.dot(b.spec->block.penalty.K * beta) / b.tau2;
    }

    double k_scale(const Block& b) const {
        return b.spec->block.prior_kind == PriorKind::flat_unpenalized ? 0.0 : 1.0 / b.tau2;
    }

    /// rhs = B' W (eta_k - eta_minus + g / w) = B'(w . fit + g).
    Vector iwls_rhs(const Block& b, const Vector& fit, const Vector& grad, const Vector& weight) const {
        return b.spec->block.B.transpose_times(Vector(weight.cwiseProduct(fit) + grad));
    }

    void update_beta(std::size_t idx) {
        Block& b = blocks_[idx];
        const EffectBlock& eb = b.spec->block;
        const Matrix& a = eb.constraint.A;
        const int k = b.predictor;
        Vector grad, weight;

        const double ll_cur = evaluate(k, grad, weight);
        b.ws->assemble_and_factor(weight, k_scale(b), eb.label);
        Vector proposal;
        double log_fwd = 0.0;
        {
            ConstrainedGaussian q(*b.ws, iwls_rhs(b, b.fit, grad, weight), a);
            proposal = q.draw(rng_);
            log_fwd = q.log_density(proposal);
        }
        const Vector fit_new = eb.B * proposal;
        eta_.col(k) += fit_new - b.fit;
        ++proposed_[idx];

        bool accept = true;
        if (cfg_.mh_correction) {
            const double ll_new = evaluate(k, grad, weight);
            b.ws->assemble_and_factor(weight, k_scale(b), eb.label);
            ConstrainedGaussian q_rev(*b.ws, iwls_rhs(b, fit_new, grad, weight), a);
            const double log_rev = q_rev.log_density(b.beta);
            const double log_ratio = ll_new - ll_cur + log_prior(b, proposal) - log_prior(b, b.beta) + log_rev - log_fwd;
            detail::require_numeric(!std::isnan(log_ratio), "MH ratio is NaN");
            max_log_ratio_[idx] = std::max(max_log_ratio_[idx], std::fabs(log_ratio));
            accept = log_ratio >= 0.0 || std::log(rng_.uniform()) < log_ratio;
        }
        if (accept) {
            ++accepted_[idx];
            b.beta = proposal;
            b.fit = fit_new;
        } else {
            eta_.col(k) -= fit_new - b.fit;
        }
    }

    void update_variance(Block& b) {
        const EffectBlock& eb = b.spec->block;
        if (eb.prior_kind == PriorKind::flat_unpenalized) return;
        const double qf = b.beta.dot(eb.penalty.K * b.beta);
        if (eb.prior_kind == PriorKind::nbpss) {
            b.sel.omega = omegas_[b.omega_slot];
            b.tau2 = update_tau2_selected(b.m, qf, b.sel, b.spec->hyper, rng_);
            b.sel.tau2 = b.tau2;
        } else {
            b.tau2 = update_tau2_unselected(b.m, qf, b.spec->ig_a, b.spec->ig_b, rng_);
        }
        detail::require_numeric(std::isfinite(b.tau2) && b.tau2 > 0.0, "tau2 draw is not a positive finite number");
    }

    void update_selection(Block& b) {
        const NbpssHyper& h = b.spec->hyper;
        b.sel.omega = omegas_[b.omega_slot];
        b.sel.delta = update_delta(b.sel, h, rng_);
        b.sel.psi2 = update_psi2(b.sel, h, rng_);
        std::vector<int> deltas;
        for (std::size_t member : group_members_[b.omega_slot]) {
            deltas.push_back(&blocks_[member] == &b ? b.sel.delta : blocks_[member].sel.delta);
        }
        omegas_[b.omega_slot] = update_omega(deltas, h, omegas_[b.omega_slot], rng_);
        b.sel.omega = omegas_[b.omega_slot];
    }

    void update_sigma2() {
        recompute_eta();
        const RowMatrix& y = response();
        const double sse = (y.col(0) - eta_.col(0)).squaredNorm();
        family_.sigma2 = rng_.inverse_gamma(model_.var_a + 0.5 * static_cast<double>(model_.n()), model_.var_b + 0.5 * sse);
    }

    void store(ChainOutput& out, Index row) {
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const Block& b = blocks_[i];
            const BlockColumns& c = layout_.blocks[i];
            out.draws.row(row).segment(c.beta, c.dim) = b.beta.transpose();
            if (c.tau2 >= 0) out.draws(row, c.tau2) = b.tau2;
            if (c.psi2 >= 0) {
                out.draws(row, c.psi2) = b.sel.psi2;
                out.draws(row, c.delta) = b.sel.delta;
                out.draws(row, c.omega) = omegas_[b.omega_slot];
            }
            const Matrix& a = b.spec->block.constraint.A;
            if (a.rows() > 0) {
                out.max_constraint_residual = std::max(out.max_constraint_residual, (a * b.beta).cwiseAbs().maxCoeff());
            }
        }
        if (layout_.sigma2 >= 0) out.draws(row, layout_.sigma2) = family_.sigma2;
    }

    const Model& model_;
    ChainConfig cfg_;
    Rng rng_;
    std::uint64_t stream_;
    ResponseFamily family_;
    DrawLayout layout_;
    std::vector<Block> blocks_;
    std::vector<std::size_t> order_;
    std::vector<double> omegas_;
    std::vector<std::vector<std::size_t>> group_members_;
    RowMatrix eta_;
    std::optional<RowMatrix> y_override_;
    std::vector<long> accepted_;
    std::vector<long> proposed_;
    std::vector<double> max_log_ratio_;
    long iteration_ = 0;
};

inline ChainOutput run_chain(const Model& model, const ChainConfig& cfg, std::uint64_t stream = 0) {
    Sampler s(model, cfg, stream);
    return s.run();
}

/// Worker count: hardware concurrency capped by NBPSS_THREADS when set.
inline unsigned worker_limit() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NBPSS_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    }
    return n;
}

/// Runs `tasks` jobs on at most worker_limit() threads; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t tasks, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(tasks, worker_limit());
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) fn(i);
        return;
    }
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= tasks || failure) return;
                    i = next++;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Chain c uses RNG stream c of the configured seed, so results do not depend on scheduling.
inline std::vector<ChainOutput> run_chains(const Model& model, const ChainConfig& cfg, int chains) {
    detail::require(chains >= 1, "chain count must be at least 1");
    std::vector<ChainOutput> out(static_cast<std::size_t>(chains));
    parallel_for(out.size(), [&](std::size_t c) { out[c] = run_chain(model, cfg, c); });
    return out;
}

} // namespace nbpss
