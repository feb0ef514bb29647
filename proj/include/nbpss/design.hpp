#pragma once

#include "errors.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nbpss {

// ---------------------------------------------------------------------------
// Knots and B-spline evaluation

/** Equidistant knot set. `interior_count` knots span [lower, upper] including
 * both ends; `degree` further knots are added equidistantly on each side. */
struct Knots {
    int interior_count = 20;
    int degree = 3;
    double lower = 0.0;
    double upper = 1.0;
    std::vector<double> full_sequence;

    /// Number of B-spline basis functions.
    int dimension() const { return interior_count + degree - 1; }
};

inline Knots make_knots(double lower, double upper, int interior_count, int degree) {
    detail::require(interior_count >= 2, "knots: need at least 2 interior knots");
    detail::require(degree >= 1, "knots: degree must be >= 1");
    detail::require(std::isfinite(lower) && std::isfinite(upper) && upper > lower,
                    "knots: covariate range is empty or non-finite");
    Knots k;
    k.interior_count = interior_count;
    k.degree = degree;
    k.lower = lower;
    k.upper = upper;
    const double h = (upper - lower) / (interior_count - 1);
    const int total = interior_count + 2 * degree;
    k.full_sequence.resize(total);
    for (int i = 0; i < total; ++i) k.full_sequence[i] = lower + (i - degree) * h;
    k.full_sequence[degree] = lower;
    k.full_sequence[degree + interior_count - 1] = upper;
    return k;
}

/** Non-zero B-spline values at x: returns (first index, degree+1 values).
 * x is clamped to the knot range covered by complete bases. */
inline std::pair<int, std::vector<double>> bspline_row(const Knots& k, double x) {
    const auto& t = k.full_sequence;
    const int p = k.degree;
    const int ncoef = k.dimension();
    // find span j with t[j] <= x < t[j+1], j in [p, ncoef-1]
    int j;
    if (x >= t[ncoef]) {
        j = ncoef - 1;
    } else if (x <= t[p]) {
        j = p;
    } else {
        j = static_cast<int>(std::upper_bound(t.begin() + p, t.begin() + ncoef + 1, x) - t.begin()) - 1;
    }
    // Cox-de Boor, triangular scheme
    std::vector<double> n(p + 1, 0.0), left(p + 1), right(p + 1);
    n[0] = 1.0;
    for (int d = 1; d <= p; ++d) {
        left[d] = x - t[j + 1 - d];
        right[d] = t[j + d] - x;
        double saved = 0.0;
        for (int r = 0; r < d; ++r) {
            const double tmp = n[r] / (right[r + 1] + left[d - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        n[d] = saved;
    }
    return {j - p, std::move(n)};
}

inline SparseMatrix bspline_design(const Knots& k, const Vector& x) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(x.size()) * (k.degree + 1));
    for (Index i = 0; i < x.size(); ++i) {
        auto [first, vals] = bspline_row(k, x(i));
        for (std::size_t r = 0; r < vals.size(); ++r) {
            if (vals[r] != 0.0) trip.emplace_back(static_cast<int>(i), first + static_cast<int>(r), vals[r]);
        }
    }
    SparseMatrix b(x.size(), k.dimension());
    b.setFromTriplets(trip.begin(), trip.end());
    return b;
}

/// Difference matrix of the given order on `d` coefficients.
inline SparseMatrix difference_matrix(int d, int order) {
    Matrix diff = Matrix::Identity(d, d);
    for (int o = 0; o < order; ++o) {
        Matrix next(diff.rows() - 1, d);
        for (Index r = 0; r + 1 < diff.rows(); ++r) next.row(r) = diff.row(r + 1) - diff.row(r);
        diff = next;
    }
    return diff.sparseView();
}

// ---------------------------------------------------------------------------
// Penalty, constraint and design storage

enum class PenaltyKind { rw1, rw2, gmrf_adjacency, identity, none };
enum class PriorKind { nbpss, inverse_gamma_smoothing, flat_unpenalized };
enum class BasisKind { intercept, linear, bspline, gmrf, iid };

inline const char* to_string(PriorKind p) {
    switch (p) {
        case PriorKind::nbpss: return "nbpss";
        case PriorKind::inverse_gamma_smoothing: return "inverse_gamma_smoothing";
        case PriorKind::flat_unpenalized: return "flat_unpenalized";
    }
    return "?";
}

struct PenaltyMatrix {
    SparseMatrix K;
    Index rank = 0;
    PenaltyKind kind = PenaltyKind::none;

    Index dim() const { return K.rows(); }
    Matrix dense() const { return Matrix(K); }
};

inline PenaltyMatrix make_penalty(SparseMatrix k, PenaltyKind kind) {
    PenaltyMatrix p;
    p.K = std::move(k);
    p.kind = kind;
    p.rank = p.K.rows() == 0 ? 0 : numeric_rank_symmetric(p.dense());
    return p;
}

/// Linear restriction A beta = 0; rows are orthonormal.
struct ConstraintMatrix {
    Matrix A;

    bool empty() const { return A.rows() == 0; }
    Index rows() const { return A.rows(); }
};

/// Design matrix held dense (linear effects) or sparse (basis expansions).
class DesignMatrix {
public:
    DesignMatrix() = default;
    explicit DesignMatrix(Matrix dense) : store_(std::move(dense)) {}
    explicit DesignMatrix(SparseMatrix sparse) : store_(std::move(sparse)) { std::get<SparseMatrix>(store_).makeCompressed(); }

    bool is_sparse() const { return std::holds_alternative<SparseMatrix>(store_); }
    Index rows() const { return std::visit([](const auto& m) { return m.rows(); }, store_); }
    Index cols() const { return std::visit([](const auto& m) { return m.cols(); }, store_); }

    Vector operator*(const Vector& beta) const {
        return std::visit([&](const auto& m) -> Vector { return m * beta; }, store_);
    }

    Vector transpose_times(const Vector& v) const {
        return std::visit([&](const auto& m) -> Vector { return m.transpose() * v; }, store_);
    }

    /// B' diag(w) B, always returned sparse so the sampler can factor it uniformly.
    SparseMatrix weighted_gram(const Vector& w) const {
        if (is_sparse()) {
            const auto& b = std::get<SparseMatrix>(store_);
            SparseMatrix wb = w.asDiagonal() * b;
            return SparseMatrix(b.transpose() * wb);
        }
        const auto& b = std::get<Matrix>(store_);
        Matrix g = b.transpose() * w.asDiagonal() * b;
        return g.sparseView(0.0, 0.0);
    }

    Matrix to_dense() const {
        if (is_sparse()) return Matrix(std::get<SparseMatrix>(store_));
        return std::get<Matrix>(store_);
    }

    Eigen::RowVectorXd column_sums() const {
        return std::visit([](const auto& m) -> Eigen::RowVectorXd {
            return Eigen::RowVectorXd::Ones(m.rows()) * m;
        }, store_);
    }

    const SparseMatrix* sparse() const { return std::get_if<SparseMatrix>(&store_); }
    const Matrix* dense() const { return std::get_if<Matrix>(&store_); }

private:
    std::variant<Matrix, SparseMatrix> store_{Matrix()};
};

/// Undirected region graph for spatial effects.
struct RegionGraph {
    std::vector<std::string> nodes;
    Matrix adjacency;   ///< symmetric 0/1, zero diagonal

    Index size() const { return static_cast<Index>(nodes.size()); }

    std::optional<Index> index_of(const std::string& label) const {
        auto it = std::find(nodes.begin(), nodes.end(), label);
        if (it == nodes.end()) return std::nullopt;
        return static_cast<Index>(it - nodes.begin());
    }

    /// Graph with nodes "0".."n-1".
    static RegionGraph from_adjacency(Matrix adj) {
        RegionGraph g;
        g.adjacency = std::move(adj);
        for (Index i = 0; i < g.adjacency.rows(); ++i) g.nodes.push_back(std::to_string(i));
        return g;
    }
};

/** One model term: design, penalty, constraint and prior kind, plus what is
 * needed to re-evaluate the basis at new covariate values. */
struct EffectBlock {
    std::string label;
    DesignMatrix B;
    PenaltyMatrix penalty;
    ConstraintMatrix constraint;
    PriorKind prior_kind = PriorKind::nbpss;
    std::vector<std::string> covariate_ref;

    BasisKind basis = BasisKind::linear;
    std::optional<Knots> knots;
    int rw_order = 0;
    Vector covariate;        ///< x the block was built from (spline/linear)
    Vector shift;            ///< per-column centering applied to linear columns
    std::vector<std::string> levels;   ///< gmrf/iid column labels

    Index dim() const { return B.cols(); }
    Index n() const { return B.rows(); }

    /** Design rows for new covariate values (one column of x per linear column).
     * For gmrf/iid blocks x holds level indices. */
    Matrix evaluate(const Matrix& x) const {
        switch (basis) {
            case BasisKind::intercept:
                return Matrix::Ones(x.rows(), 1);
            case BasisKind::linear: {
                Matrix out = x;
                for (Index c = 0; c < out.cols() && c < shift.size(); ++c) out.col(c).array() -= shift(c);
                return out;
            }
            case BasisKind::bspline:
                return Matrix(bspline_design(*knots, x.col(0)));
            case BasisKind::gmrf:
            case BasisKind::iid: {
                Matrix out = Matrix::Zero(x.rows(), dim());
                for (Index i = 0; i < x.rows(); ++i) out(i, static_cast<Index>(x(i, 0))) = 1.0;
                return out;
            }
        }
        return {};
    }
};

/// Linear and non-linear parts of a random-walk penalized spline.
struct DecomposedEffect {
    std::optional<EffectBlock> linear_part;
    EffectBlock nonlinear_part;
};

// ---------------------------------------------------------------------------
// Operations

/** Orthonormal basis of ker(K) as constraint rows. With `center` and a
 * design, the functional 1'B is appended when not already in their span. */
inline ConstraintMatrix make_constraint(const PenaltyMatrix& penalty, bool center,
                                        const DesignMatrix* design = nullptr) {
    ConstraintMatrix c;
    const Index d = penalty.dim();
    c.A.resize(0, d);
    if (d == 0 || penalty.kind == PenaltyKind::none || penalty.K.norm() == 0.0) return c;
    const SymmetricSpectrum s = symmetric_spectrum(penalty.dense());
    c.A = s.kernel_basis.transpose();
    if (center && design != nullptr) append_if_independent(c.A, design->column_sums());
    return c;
}

inline void check_finite(const Vector& x, const std::string& what) {
    for (Index i = 0; i < x.size(); ++i) {
        detail::require(std::isfinite(x(i)), what + ": non-finite covariate value at row " + std::to_string(i));
    }
}

/** P-spline block: equidistant B-spline basis over the observed range with a
 * random-walk penalty of order `rw_order` and its null-space constraint. */
inline EffectBlock make_bspline_block(const Vector& x, int interior_knots = 20, int degree = 3, int rw_order = 2,
                                      std::string label = "spline", PriorKind prior = PriorKind::nbpss) {
    check_finite(x, label);
    detail::require(rw_order == 1 || rw_order == 2, label + ": rw_order must be 1 or 2");
    detail::require(x.size() > 0, label + ": empty covariate");
    const double lo = x.minCoeff();
    const double hi = x.maxCoeff();
    detail::require(hi > lo, label + ": fewer than 2 distinct covariate values");

    EffectBlock blk;
    blk.label = std::move(label);
    blk.basis = BasisKind::bspline;
    blk.knots = make_knots(lo, hi, interior_knots, degree);
    blk.rw_order = rw_order;
    blk.covariate = x;
    blk.B = DesignMatrix(bspline_design(*blk.knots, x));
    const int d = blk.knots->dimension();
    detail::require(d > rw_order, blk.label + ": basis too small for the random-walk order");
    SparseMatrix diff = difference_matrix(d, rw_order);
    blk.penalty = make_penalty(SparseMatrix(diff.transpose() * diff), rw_order == 1 ? PenaltyKind::rw1 : PenaltyKind::rw2);
    blk.prior_kind = prior;
    blk.constraint = make_constraint(blk.penalty, false);
    return blk;
}

inline SparseMatrix indicator_design(const std::vector<Index>& idx, Index ncol) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(idx[i]), 1.0);
    SparseMatrix b(static_cast<Index>(idx.size()), ncol);
    b.setFromTriplets(trip.begin(), trip.end());
    return b;
}

/// GMRF spatial block with K = diag(degree) - adjacency.
inline EffectBlock make_gmrf_block(const std::vector<std::string>& region, const RegionGraph& graph,
                                   std::string label = "spatial", PriorKind prior = PriorKind::nbpss) {
    const Matrix& adj = graph.adjacency;
    const Index s = adj.rows();
    detail::require(adj.cols() == s && s == graph.size(), label + ": adjacency must be square and match the node list");
    for (Index i = 0; i < s; ++i) {
        detail::require(adj(i, i) == 0.0, label + ": adjacency has a non-zero diagonal");
        for (Index j = 0; j < s; ++j) {
            detail::require(adj(i, j) == adj(j, i), label + ": adjacency is not symmetric");
            detail::require(adj(i, j) == 0.0 || adj(i, j) == 1.0, label + ": adjacency entries must be 0/1");
        }
    }
    std::vector<Index> idx;
    idx.reserve(region.size());
    for (const auto& r : region) {
        auto pos = graph.index_of(r);
        detail::require(pos.has_value(), label + ": region '" + r + "' is not a node of the graph");
        idx.push_back(*pos);
    }
    EffectBlock blk;
    blk.label = std::move(label);
    blk.basis = BasisKind::gmrf;
    blk.levels = graph.nodes;
    blk.B = DesignMatrix(indicator_design(idx, s));
    Matrix k = -adj;
    k.diagonal() = adj.rowwise().sum();
    blk.penalty = make_penalty(k.sparseView(), PenaltyKind::gmrf_adjacency);
    blk.prior_kind = prior;
    blk.constraint = make_constraint(blk.penalty, false);
    return blk;
}

/** Linear effects: B = x. Under selection K = I; flat blocks carry a zero
 * penalty. Columns under selection must not be constant. */
inline EffectBlock make_linear_block(const Matrix& x, std::string label = "linear", PriorKind prior = PriorKind::nbpss) {
    for (Index c = 0; c < x.cols(); ++c) {
        check_finite(x.col(c), label);
        if (prior != PriorKind::flat_unpenalized) {
            const double mean = x.col(c).mean();
            const double ss = (x.col(c).array() - mean).square().sum();
            detail::require(ss > 0.0, label + ": column " + std::to_string(c) + " is constant (sd = 0) under selection");
        }
    }
    EffectBlock blk;
    blk.label = std::move(label);
    blk.basis = BasisKind::linear;
    blk.covariate = x.cols() > 0 ? Vector(x.col(0)) : Vector();
    blk.shift = Vector::Zero(x.cols());
    blk.B = DesignMatrix(x);
    const Index d = x.cols();
    if (prior == PriorKind::flat_unpenalized) {
        blk.penalty = make_penalty(SparseMatrix(d, d), PenaltyKind::none);
    } else {
        SparseMatrix eye(d, d);
        eye.setIdentity();
        blk.penalty = make_penalty(eye, PenaltyKind::identity);
    }
    blk.prior_kind = prior;
    blk.constraint.A.resize(0, d);
    return blk;
}

inline EffectBlock make_intercept_block(Index n, std::string label = "(Intercept)") {
    EffectBlock blk = make_linear_block(Matrix::Ones(n, 1), std::move(label), PriorKind::flat_unpenalized);
    blk.basis = BasisKind::intercept;
    return blk;
}

/// i.i.d. Gaussian random effect over the levels of a grouping factor.
inline EffectBlock make_iid_block(const std::vector<std::string>& group, std::string label = "iid",
                                  PriorKind prior = PriorKind::inverse_gamma_smoothing) {
    std::map<std::string, Index> pos;
    std::vector<std::string> levels;
    for (const auto& g : group) {
        if (pos.emplace(g, static_cast<Index>(levels.size())).second) levels.push_back(g);
    }
    std::vector<Index> idx;
    idx.reserve(group.size());
    for (const auto& g : group) idx.push_back(pos.at(g));
    EffectBlock blk;
    blk.label = std::move(label);
    blk.basis = BasisKind::iid;
    blk.levels = levels;
    const auto d = static_cast<Index>(levels.size());
    blk.B = DesignMatrix(indicator_design(idx, d));
    SparseMatrix eye(d, d);
    eye.setIdentity();
    blk.penalty = make_penalty(eye, PenaltyKind::identity);
    blk.prior_kind = prior;
    blk.constraint.A.resize(0, d);
    return blk;
}

/** Split a random-walk spline into its unpenalized polynomial part (centered
 * covariate, rw2 only) and its penalized deviation restricted to range(K). */
inline DecomposedEffect decompose_effect(const EffectBlock& block) {
    detail::require(block.basis == BasisKind::bspline &&
                        (block.penalty.kind == PenaltyKind::rw1 || block.penalty.kind == PenaltyKind::rw2),
                    block.label + ": decomposition needs a random-walk penalized spline");
    DecomposedEffect out;
    out.nonlinear_part = block;
    out.nonlinear_part.label = block.label + "_nonlin";
    out.nonlinear_part.constraint = make_constraint(block.penalty, false);
    if (block.penalty.kind == PenaltyKind::rw2) {
        const double mean = block.covariate.mean();
        Matrix xc = (block.covariate.array() - mean).matrix();
        EffectBlock lin = make_linear_block(xc, block.label + "_lin", block.prior_kind);
        lin.covariate_ref = block.covariate_ref;
        lin.covariate = block.covariate;
        lin.shift = Vector::Constant(1, mean);
        out.linear_part = std::move(lin);
    }
    return out;
}

} // namespace nbpss
