#pragma once

#include "families.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nbpss {

/// Effect with an inverse-gamma variance prior IG(a, b) (not under selection).
struct SmoothEffectInfo {
    std::string label;
    Index kappa = 0;
    double a = 0.001;
    double b = 0.001;
};

/// Effect under the spike-and-slab prior; `a`, `b` are the IG(a, b) parameters of psi^2.
struct SelectedEffectInfo {
    std::string label;
    Index kappa = 0;
    double a = 5.0;
    double b = 1.0;
};

/// Ranks and priors of one predictor in its mixed-model form eta = U b_unpen + V b_pen.
struct PredictorInfo {
    std::string name;
    std::vector<SmoothEffectInfo> smooth;
    std::vector<SelectedEffectInfo> selected;
    Index r = 0;            ///< rank of U (unpenalized columns)
    Index u_cols = 0;       ///< columns of U
    Index t = 0;            ///< rk(U, V) - rk(U)
    /// rk(U, V without the largest effect) - rk(U); used by the distributional conditions
    std::optional<Index> t_without_largest;
    /// rank of the largest effect's design on the full data, V_eps
    std::optional<Index> largest_design_rank;

    Index kappa_total() const {
        Index s = 0;
        for (const auto& e : smooth) s += e.kappa;
        for (const auto& e : selected) s += e.kappa;
        return s;
    }
};

struct ProprietyInput {
    ResponseFamily family;
    Index n = 0;
    double a_eps = 0.001;   ///< error-variance prior (Gaussian mean regression)
    double b_eps = 0.001;
    std::optional<double> sse;
    std::optional<bool> has_positive_count;
    std::vector<PredictorInfo> predictors;
};

enum class ConditionStatus { holds, violated, not_checkable };
enum class Verdict { sufficient_ok, violated, not_checkable };

inline const char* to_string(ConditionStatus s) {
    switch (s) {
        case ConditionStatus::holds: return "holds";
        case ConditionStatus::violated: return "violated";
        case ConditionStatus::not_checkable: return "not_checkable";
    }
    return "?";
}

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::sufficient_ok: return "sufficient_ok";
        case Verdict::violated: return "violated";
        case Verdict::not_checkable: return "not_checkable";
    }
    return "?";
}

struct ConditionResult {
    std::string id;          ///< e.g. "b.4"
    std::string subject;     ///< effect or predictor it was evaluated for
    ConditionStatus status = ConditionStatus::not_checkable;
    bool in_sufficient_set = false;
    double lhs = 0.0;
    double rhs = 0.0;
    std::string note;
};

struct ProprietyReport {
    std::vector<ConditionResult> conditions;
    Verdict verdict = Verdict::not_checkable;
    std::vector<Index> kappa_smooth, kappa_selected, t_k, r_k;

    std::vector<std::string> violated_ids() const {
        std::vector<std::string> ids;
        for (const auto& c : conditions) {
            if (c.in_sufficient_set && c.status == ConditionStatus::violated &&
                std::find(ids.begin(), ids.end(), c.id) == ids.end()) {
                ids.push_back(c.id);
            }
        }
        return ids;
    }

    /// Worst status of a condition id across all subjects (holds if absent).
    ConditionStatus status_of(const std::string& id) const {
        ConditionStatus worst = ConditionStatus::holds;
        for (const auto& c : conditions) {
            if (c.id != id) continue;
            if (c.status == ConditionStatus::violated) return c.status;
            if (c.status == ConditionStatus::not_checkable) worst = c.status;
        }
        return worst;
    }

    bool has(const std::string& id) const {
        return std::any_of(conditions.begin(), conditions.end(), [&](const auto& c) { return c.id == id; });
    }

    std::string verdict_line() const {
        std::string s = to_string(verdict);
        const auto ids = violated_ids();
        if (!ids.empty()) {
            s += " (";
            for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? ", " : "") + ids[i];
            s += ")";
        }
        return s;
    }
};

namespace detail {

inline ConditionResult inequality(std::string id, std::string subject, double lhs, double rhs, bool sufficient,
                                  std::string note = {}) {
    ConditionResult c;
    c.id = std::move(id);
    c.subject = std::move(subject);
    c.lhs = lhs;
    c.rhs = rhs;
    c.status = lhs > rhs ? ConditionStatus::holds : ConditionStatus::violated;
    c.in_sufficient_set = sufficient;
    c.note = std::move(note);
    return c;
}

inline ConditionResult status_only(std::string id, std::string subject, ConditionStatus st, bool sufficient,
                                   std::string note) {
    ConditionResult c;
    c.id = std::move(id);
    c.subject = std::move(subject);
    c.status = st;
    c.in_sufficient_set = sufficient;
    c.note = std::move(note);
    return c;
}

/// a < b = 0 or b > 0
inline ConditionResult ig_shape_scale(std::string id, const SmoothEffectInfo& e, bool sufficient) {
    const bool ok = (e.b == 0.0 && e.a < e.b) || e.b > 0.0;
    return status_only(std::move(id), e.label, ok ? ConditionStatus::holds : ConditionStatus::violated, sufficient,
                       "a = " + std::to_string(e.a) + ", b = " + std::to_string(e.b));
}

inline void check_gaussian_mean(const ProprietyInput& in, ProprietyReport& rep) {
    const PredictorInfo& p = in.predictors.front();
    const double kappa = static_cast<double>(p.kappa_total());
    const double gap = kappa - static_cast<double>(p.t);
    const double J = static_cast<double>(p.selected.size());
    double sum_a = 0.0, sum_min_a = 0.0;
    for (const auto& e : p.smooth) {
        rep.conditions.push_back(ig_shape_scale("b.1", e, true));
        rep.conditions.push_back(inequality("b.2", e.label, e.kappa + 2.0 * e.a, 0.0, false, "necessary if kappa < t"));
        rep.conditions.push_back(inequality("b.3", e.label, e.kappa + 2.0 * e.a, gap, true));
        sum_a += e.a;
        sum_min_a += std::min(0.0, e.a);
    }
    for (const auto& e : p.selected) {
        rep.conditions.push_back(inequality("b.4", e.label, e.kappa + 2.0 * e.a - 1.0, gap, true));
    }
    const double n = static_cast<double>(in.n);
    const double rank_u = static_cast<double>(p.r);
    rep.conditions.push_back(
        inequality("b.5", p.name, n + 2.0 * in.a_eps + 2.0 * sum_a, rank_u + J, false, "necessary condition"));
    rep.conditions.push_back(inequality("b.6", p.name, n + 2.0 * in.a_eps + 2.0 * sum_min_a, rank_u + J, true));
    if (in.b_eps > 0.0) {
        rep.conditions.push_back(inequality("b.7", p.name, in.sse.value_or(0.0) + 2.0 * in.b_eps, 0.0, true,
                                            "SSE >= 0, so b_eps > 0 suffices"));
    } else if (in.sse) {
        rep.conditions.push_back(inequality("b.7", p.name, *in.sse + 2.0 * in.b_eps, 0.0, true));
    } else {
        rep.conditions.push_back(
            status_only("b.7", p.name, ConditionStatus::not_checkable, true, "b_eps = 0 and SSE unknown"));
    }
}

inline void check_distributional(const ProprietyInput& in, ProprietyReport& rep) {
    // (c.1)/(c.2): static per-family table
    const std::string fam = in.family.name();
    switch (in.family.kind) {
        case FamilyKind::gaussian:
        case FamilyKind::gaussian_locscale:
        case FamilyKind::bivariate_normal:
            rep.conditions.push_back(status_only("c.1", fam, ConditionStatus::holds, true,
                                                 "family table: integrable in the predictors under its links"));
            rep.conditions.push_back(status_only("c.2", fam, ConditionStatus::holds, true, "n* = n, no bound needed"));
            break;
        case FamilyKind::poisson:
            if (in.has_positive_count) {
                rep.conditions.push_back(status_only(
                    "c.1", fam, *in.has_positive_count ? ConditionStatus::holds : ConditionStatus::violated, true,
                    "integrable for any record with y > 0"));
            } else {
                rep.conditions.push_back(
                    status_only("c.1", fam, ConditionStatus::not_checkable, true, "needs at least one y > 0"));
            }
            rep.conditions.push_back(status_only("c.2", fam, ConditionStatus::holds, true, "pmf bounded by 1"));
            break;
        case FamilyKind::zip:
            rep.conditions.push_back(status_only("c.1", fam, ConditionStatus::not_checkable, true,
                                                 "requires restrictions on the zero-inflation parameter"));
            rep.conditions.push_back(status_only("c.2", fam, ConditionStatus::holds, true, "pmf bounded by 1"));
            break;
    }

    // the largest random effect per predictor decides between the two theorems
    Index n_eps = -1;
    for (const auto& p : in.predictors) {
        Index largest = 0;
        for (const auto& e : p.smooth) largest = std::max(largest, e.kappa);
        for (const auto& e : p.selected) largest = std::max(largest, e.kappa);
        n_eps = n_eps < 0 ? largest : std::min(n_eps, largest);
    }

    for (const auto& p : in.predictors) {
        // largest effect; ties broken by label so the result does not depend on declaration order
        bool eps_selected = false;
        std::size_t eps_index = 0;
        Index eps_kappa = -1;
        std::string eps_label;
        auto consider = [&](Index kappa, const std::string& label, std::size_t idx, bool sel) {
            if (kappa > eps_kappa || (kappa == eps_kappa && (label < eps_label || (label == eps_label && !sel)))) {
                eps_kappa = kappa;
                eps_label = label;
                eps_index = idx;
                eps_selected = sel;
            }
        };
        for (std::size_t i = 0; i < p.smooth.size(); ++i) consider(p.smooth[i].kappa, p.smooth[i].label, i, false);
        for (std::size_t j = 0; j < p.selected.size(); ++j) consider(p.selected[j].kappa, p.selected[j].label, j, true);
        const std::string& k = p.name;
        rep.conditions.push_back(status_only("c.3", k, p.r == p.u_cols ? ConditionStatus::holds : ConditionStatus::violated,
                                             true, "U has full column rank on the full design"));
        if (eps_kappa <= 0) {
            rep.conditions.push_back(status_only("c.5", k, ConditionStatus::not_checkable, true,
                                                 "predictor has no penalized effect"));
            continue;
        }
        rep.conditions.push_back(status_only("c.4", k, ConditionStatus::holds, true,
                                             "full design: rk(U, V) = r + t by definition of t"));
        rep.conditions.push_back(status_only("c.4-submodel", k, ConditionStatus::not_checkable, false,
                                             "submodel of n_eps observations is not constructed"));
        if (p.largest_design_rank) {
            rep.conditions.push_back(status_only(
                "c.5", k, *p.largest_design_rank == eps_kappa ? ConditionStatus::holds : ConditionStatus::violated, true,
                "largest effect design has full rank on the full design"));
        } else {
            rep.conditions.push_back(status_only("c.5", k, ConditionStatus::not_checkable, true, "design rank unknown"));
        }

        const double t_eff = static_cast<double>(p.t_without_largest.value_or(p.t));
        double kappa_rest = static_cast<double>(p.kappa_total() - eps_kappa);
        const double gap = kappa_rest - t_eff;
        const double Jk = static_cast<double>(p.selected.size());
        const double rk = static_cast<double>(p.r);
        const double ne = static_cast<double>(n_eps);
        // IG-variance largest effect: (c.6b)-(c.10b); NBPSS largest effect: (c.6a)-(c.10a)
        const std::string sfx = eps_selected ? "a" : "b";
        double sum_min_a = 0.0;
        for (std::size_t l = 0; l < p.smooth.size(); ++l) {
            if (!eps_selected && l == eps_index) continue;
            const auto& e = p.smooth[l];
            rep.conditions.push_back(ig_shape_scale("c.6" + sfx, e, true));
            rep.conditions.push_back(inequality("c.7" + sfx, e.label, e.kappa + 2.0 * e.a, gap, true));
            sum_min_a += std::min(0.0, e.a);
        }
        for (std::size_t j = 0; j < p.selected.size(); ++j) {
            if (eps_selected && j == eps_index) continue;
            const auto& e = p.selected[j];
            rep.conditions.push_back(inequality("c.8" + sfx, e.label, e.kappa + 2.0 * e.a - 1.0, gap, true));
        }
        const double a_eps = eps_selected ? p.selected[eps_index].a : p.smooth[eps_index].a;
        const double b_eps = eps_selected ? p.selected[eps_index].b : p.smooth[eps_index].b;
        const double rhs9 = eps_selected ? rk + (Jk - 1.0) : rk + Jk;
        rep.conditions.push_back(inequality("c.9" + sfx, k, ne + 2.0 * a_eps + 2.0 * sum_min_a, rhs9, true));
        if (eps_selected) {
            rep.conditions.push_back(status_only("c.10a", k, ConditionStatus::not_checkable, true,
                                                 "residual sum of squares of the normalized submodel"));
        } else if (b_eps > 0.0) {
            rep.conditions.push_back(inequality("c.10b", k, 2.0 * b_eps, 0.0, true, "SSE_k >= 0, so b_eps > 0 suffices"));
        } else {
            rep.conditions.push_back(
                status_only("c.10b", k, ConditionStatus::not_checkable, true, "b_eps = 0 and SSE_k unknown"));
        }
    }
}

} // namespace detail

/** Evaluate the sufficient propriety conditions literally. Gaussian mean
 * regression (one predictor, gaussian family) uses the (b.*) list; every other
 * model uses the distributional (c.*) list. Advisory only: never throws on a
 * violated condition. */
inline ProprietyReport check_propriety(const ProprietyInput& in) {
    ProprietyReport rep;
    for (const auto& p : in.predictors) {
        for (const auto& e : p.smooth) rep.kappa_smooth.push_back(e.kappa);
        for (const auto& e : p.selected) rep.kappa_selected.push_back(e.kappa);
        rep.t_k.push_back(p.t);
        rep.r_k.push_back(p.r);
    }
    if (in.predictors.empty()) {
        rep.verdict = Verdict::not_checkable;
        return rep;
    }
    if (in.family.kind == FamilyKind::gaussian && in.predictors.size() == 1) {
        detail::check_gaussian_mean(in, rep);
    } else {
        detail::check_distributional(in, rep);
    }
    bool any_violated = false, any_unknown = false;
    for (const auto& c : rep.conditions) {
        if (!c.in_sufficient_set) continue;
        any_violated |= c.status == ConditionStatus::violated;
        any_unknown |= c.status == ConditionStatus::not_checkable;
    }
    rep.verdict = any_violated ? Verdict::violated : any_unknown ? Verdict::not_checkable : Verdict::sufficient_ok;
    return rep;
}

} // namespace nbpss
