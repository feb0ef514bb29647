#pragma once

#include "design.hpp"
#include "families.hpp"
#include "nbpss_prior.hpp"
#include "propriety.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nbpss {

/// A block together with the prior settings it is sampled under.
struct BlockSpec {
    EffectBlock block;
    NbpssHyper hyper;          ///< used when block.prior_kind == nbpss
    double ig_a = 0.001;       ///< IG(a, b) on tau^2 when block.prior_kind == inverse_gamma_smoothing
    double ig_b = 0.001;
    std::string term;          ///< user-facing term the block belongs to (linear + nonlinear share one)
    std::optional<std::string> omega_group;   ///< blocks naming the same group share one omega
};

/// One distributional parameter: its predictor is the sum of its blocks.
struct Predictor {
    std::string name;
    std::vector<BlockSpec> blocks;
};

struct Model {
    ResponseFamily family;
    RowMatrix y;   ///< n x response_dim
    std::vector<Predictor> predictors;
    double var_a = 0.001;       ///< IG prior of the Gaussian error variance (family gaussian)
    double var_b = 0.001;
    bool fixed_variance = false;

    Index n() const { return y.rows(); }

    void validate() const {
        detail::require(static_cast<int>(predictors.size()) == family.parameter_count(),
                        "model: predictor count does not match the family");
        detail::require(y.cols() == family.response_dim(), "model: response has wrong dimension");
        std::vector<double> rec(static_cast<std::size_t>(y.cols()));
        for (Index i = 0; i < y.rows(); ++i) {
            for (Index c = 0; c < y.cols(); ++c) rec[c] = y(i, c);
            check_response(family, rec);
        }
        for (const auto& p : predictors) {
            for (const auto& b : p.blocks) {
                detail::require(b.block.n() == n(), "model: block '" + b.block.label + "' has wrong row count");
                if (b.block.prior_kind == PriorKind::nbpss) b.hyper.validate();
                if (b.block.prior_kind == PriorKind::inverse_gamma_smoothing) {
                    detail::require(b.ig_a + 0.5 * static_cast<double>(b.block.penalty.rank) > 0.0 && b.ig_b >= 0.0,
                                    "model: block '" + b.block.label + "' has an unusable IG prior");
                }
            }
        }
        std::map<std::string, std::pair<double, double>> groups;
        for (const auto& p : predictors) {
            for (const auto& b : p.blocks) {
                if (!b.omega_group || b.block.prior_kind != PriorKind::nbpss) continue;
                auto [it, fresh] = groups.emplace(*b.omega_group, std::make_pair(b.hyper.a0, b.hyper.b0));
                detail::require(fresh || (it->second.first == b.hyper.a0 && it->second.second == b.hyper.b0 &&
                                          !b.hyper.fixed_omega),
                                "model: omega group '" + *b.omega_group + "' mixes different (a0, b0) or a fixed omega");
            }
        }
        if (family.kind == FamilyKind::gaussian && !fixed_variance) {
            detail::require(var_a + 0.5 * static_cast<double>(n()) > 0.0, "model: unusable error-variance prior");
        }
    }
};

/** Rank summary of a model in mixed-model form for the propriety checker.
 * U collects the flat blocks; every penalized block contributes B N, N a basis
 * of its admissible subspace. */
inline ProprietyInput propriety_input(const Model& m) {
    ProprietyInput in;
    in.family = m.family;
    in.n = m.n();
    in.a_eps = m.var_a;
    in.b_eps = m.fixed_variance ? 1.0 : m.var_b;
    if (m.family.is_discrete()) in.has_positive_count = (m.y.col(0).array() > 0.0).any();
    for (const auto& pred : m.predictors) {
        PredictorInfo info;
        info.name = pred.name;
        std::vector<Matrix> u_parts;
        std::vector<std::pair<Index, Matrix>> v_parts;   // (kappa, B N)
        std::vector<std::string> v_labels;
        for (const auto& bs : pred.blocks) {
            const EffectBlock& b = bs.block;
            if (b.prior_kind == PriorKind::flat_unpenalized) {
                u_parts.push_back(b.B.to_dense());
                continue;
            }
            const ConstrainedPrior cp = ConstrainedPrior::from(b.penalty, b.constraint);
            v_parts.emplace_back(cp.dim(), b.B.to_dense() * cp.subspace);
            v_labels.push_back(b.label);
            if (b.prior_kind == PriorKind::nbpss) {
                info.selected.push_back({b.label, cp.dim(), bs.hyper.a, bs.hyper.b});
            } else {
                info.smooth.push_back({b.label, cp.dim(), bs.ig_a, bs.ig_b});
            }
        }
        auto hcat = [&](const std::vector<Matrix>& parts) {
            Index cols = 0;
            for (const auto& p : parts) cols += p.cols();
            Matrix out(m.n(), cols);
            Index c = 0;
            for (const auto& p : parts) {
                out.middleCols(c, p.cols()) = p;
                c += p.cols();
            }
            return out;
        };
        const Matrix u = hcat(u_parts);
        info.u_cols = u.cols();
        info.r = numeric_rank(u);
        std::vector<Matrix> all = u_parts;
        for (const auto& v : v_parts) all.push_back(v.second);
        info.t = numeric_rank(hcat(all)) - info.r;

        if (!v_parts.empty()) {
            // largest effect by (kappa desc, label asc), matching the checker's tie rule
            std::size_t eps = 0;
            for (std::size_t i = 1; i < v_parts.size(); ++i) {
                if (v_parts[i].first > v_parts[eps].first ||
                    (v_parts[i].first == v_parts[eps].first && v_labels[i] < v_labels[eps])) {
                    eps = i;
                }
            }
            std::vector<Matrix> rest = u_parts;
            for (std::size_t i = 0; i < v_parts.size(); ++i) {
                if (i != eps) rest.push_back(v_parts[i].second);
            }
            info.t_without_largest = numeric_rank(hcat(rest)) - info.r;
            info.largest_design_rank = numeric_rank(v_parts[eps].second);
        }
        in.predictors.push_back(std::move(info));
    }
    return in;
}

inline ProprietyReport check_propriety(const Model& m) { return check_propriety(propriety_input(m)); }

} // namespace nbpss
