#pragma once

#include "config.hpp"
#include "dataset.hpp"
#include "elicitation.hpp"
#include "sampler.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nbpss {

// ---------------------------------------------------------------------------
// Model construction

/// A user-facing term and the blocks it was expanded into.
struct TermInfo {
    std::string label;       ///< unique across predictors; also the effects file name
    std::string parameter;
    int predictor = 0;
    TermType type = TermType::spline;
    std::string covariate;
    std::vector<std::size_t> blocks;   ///< indices into the predictor's blocks
    Scaling scaling;                   ///< identity when not standardized
    double lower = 0.0;                ///< covariate range on the model scale
    double upper = 0.0;
    std::vector<std::string> levels;   ///< spatial/iid levels
};

struct ElicitationRecord {
    std::string block;
    double alpha = 0.0;
    double c = 0.0;
    ElicitationResult result;
};

struct BuiltModel {
    ModelConfig config;
    Model model;
    std::vector<TermInfo> terms;
    std::vector<ElicitationRecord> elicited;
};

struct BuildOptions {
    bool elicit = true;   ///< when false, elicited blocks keep placeholder (b, r) to be overwritten
};

inline BuiltModel build_model(const ModelConfig& cfg, const Table& data, const std::optional<RegionGraph>& graph,
                              BuildOptions opts = {}) {
    BuiltModel bm;
    bm.config = cfg;
    Model& m = bm.model;
    m.family = ResponseFamily::from_name(cfg.family);
    const Index n = data.rows();
    m.y.resize(n, static_cast<Index>(cfg.response.size()));
    for (std::size_t c = 0; c < cfg.response.size(); ++c) m.y.col(static_cast<Index>(c)) = data.numeric(cfg.response[c]);
    m.var_a = cfg.var_a;
    m.var_b = cfg.var_b;
    if (cfg.fixed_variance) {
        m.fixed_variance = true;
        m.family.sigma2 = *cfg.fixed_variance;
    }
    const bool multi = m.family.parameter_count() > 1;
    const std::uint64_t el_seed = cfg.elicitation_seed.value_or(cfg.chain.seed);
    std::uint64_t el_stream = 0;

    for (std::size_t k = 0; k < cfg.predictors.size(); ++k) {
        const PredictorConfig& pc = cfg.predictors[k];
        Predictor pred;
        pred.name = pc.parameter;
        const std::string prefix = multi ? pc.parameter + "." : "";
        if (cfg.intercept) {
            BlockSpec ic;
            ic.block = make_intercept_block(n, prefix + "(Intercept)");
            ic.term = ic.block.label;
            pred.blocks.push_back(std::move(ic));
        }
        for (const TermConfig& t : pc.terms) {
            TermInfo info;
            info.label = prefix + t.label;
            info.parameter = pc.parameter;
            info.predictor = static_cast<int>(k);
            info.type = t.type;
            info.covariate = t.covariate;
            std::vector<EffectBlock> blocks;
            const PriorKind penalized = t.select ? PriorKind::nbpss : PriorKind::inverse_gamma_smoothing;
            switch (t.type) {
                case TermType::linear:
                case TermType::spline: {
                    Vector x = data.numeric(t.covariate);
                    check_finite(x, t.covariate);
                    if (cfg.standardize) {
                        info.scaling = scaling_of(x, t.covariate);
                        x = standardize(x, info.scaling);
                    }
                    info.lower = x.minCoeff();
                    info.upper = x.maxCoeff();
                    if (t.type == TermType::linear) {
                        if (t.select) scaling_of(x, t.covariate);   // rejects a constant column
                        EffectBlock b = make_linear_block(x, info.label, t.select ? PriorKind::nbpss : PriorKind::flat_unpenalized);
                        b.covariate_ref = {t.covariate};
                        blocks.push_back(std::move(b));
                    } else {
                        EffectBlock b = make_bspline_block(x, t.knots, t.degree, t.rw_order, info.label, penalized);
                        b.covariate_ref = {t.covariate};
                        if (t.decompose) {
                            DecomposedEffect d = decompose_effect(b);
                            if (d.linear_part) blocks.push_back(std::move(*d.linear_part));
                            blocks.push_back(std::move(d.nonlinear_part));
                        } else {
                            blocks.push_back(std::move(b));
                        }
                    }
                    break;
                }
                case TermType::spatial: {
                    detail::require(graph.has_value(), "term '" + t.label + "': spatial terms need an adjacency");
                    EffectBlock b = make_gmrf_block(data.text(t.covariate), *graph, info.label, penalized);
                    b.covariate_ref = {t.covariate};
                    info.levels = b.levels;
                    blocks.push_back(std::move(b));
                    break;
                }
                case TermType::iid: {
                    EffectBlock b = make_iid_block(data.text(t.covariate), info.label, penalized);
                    b.covariate_ref = {t.covariate};
                    info.levels = b.levels;
                    blocks.push_back(std::move(b));
                    break;
                }
            }
            for (EffectBlock& b : blocks) {
                BlockSpec bs;
                bs.term = info.label;
                bs.ig_a = t.ig_a;
                bs.ig_b = t.ig_b;
                bs.hyper.a = t.a;
                bs.hyper.a0 = t.a0;
                bs.hyper.b0 = t.b0;
                bs.hyper.fixed_omega = t.omega;
                if (t.group) bs.omega_group = *t.group;
                if (b.prior_kind == PriorKind::nbpss) {
                    if (t.b) {
                        bs.hyper.b = *t.b;
                        bs.hyper.r = *t.r;
                    } else if (opts.elicit) {
                        ElicitationTarget target;
                        target.alpha = t.alpha;
                        target.c = t.c;
                        target.mc_draws = cfg.elicitation_draws;
                        target.seed = el_seed + 0x9E3779B97F4A7C15ULL * (el_stream + 1);
                        ElicitationRecord rec{b.label, t.alpha, t.c, elicit(b, t.a, target)};
                        bs.hyper.b = rec.result.b;
                        bs.hyper.r = rec.result.r;
                        bm.elicited.push_back(rec);
                    }
                    ++el_stream;
                }
                info.blocks.push_back(pred.blocks.size());
                bs.block = std::move(b);
                pred.blocks.push_back(std::move(bs));
            }
            bm.terms.push_back(std::move(info));
        }
        m.predictors.push_back(std::move(pred));
    }
    m.validate();
    return bm;
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    detail::require(static_cast<bool>(in), "cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Reads a config file, its dataset and adjacency, and builds the model.
inline BuiltModel load_model(const std::filesystem::path& config_path, BuildOptions opts = {},
                             std::optional<std::uint64_t> seed_override = std::nullopt) {
    ModelConfig cfg = parse_model_config(read_text_file(config_path), config_path.parent_path());
    if (seed_override) cfg.chain.seed = *seed_override;
    detail::require(!cfg.data.empty(), "$.data: required key is missing");
    const Table data = load_csv(cfg.data);
    std::optional<RegionGraph> graph;
    if (cfg.nodes) graph = load_graph(*cfg.nodes, *cfg.edges);
    return build_model(cfg, data, graph, opts);
}

// ---------------------------------------------------------------------------
// Posterior summaries

struct InclusionRow {
    std::string parameter;
    std::string block;
    std::string term;
    double probability = 0.0;
    bool selected = false;
    double b = 0.0;
    double r = 0.0;
};

struct CoefficientSummary {
    std::string block;
    Vector mean;
    Vector lower;
    Vector upper;
};

struct EffectCurve {
    std::string term;
    std::vector<std::string> x;   ///< grid values on the original covariate scale, or level labels
    Vector mean;
    Vector lower;
    Vector upper;
};

struct PosteriorSummary {
    std::vector<InclusionRow> inclusion;
    std::vector<CoefficientSummary> coefficients;
    std::vector<EffectCurve> curves;
    std::vector<std::pair<std::string, double>> acceptance;
    Index draws = 0;
    int chains = 0;
    bool approximate = false;
    double threshold = 0.5;
};

/// Type-7 empirical quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double p) {
    detail::require(!v.empty(), "quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline void column_bands(const Matrix& s, Vector& mean, Vector& lo, Vector& hi) {
    mean = s.colwise().mean().transpose();
    lo.resize(s.cols());
    hi.resize(s.cols());
    std::vector<double> col(static_cast<std::size_t>(s.rows()));
    for (Index j = 0; j < s.cols(); ++j) {
        for (Index i = 0; i < s.rows(); ++i) col[static_cast<std::size_t>(i)] = s(i, j);
        lo(j) = quantile(col, 0.025);
        hi(j) = quantile(col, 0.975);
        // rounding in the mean can step outside a collapsed interval
        mean(j) = std::clamp(mean(j), lo(j), hi(j));
    }
}

inline Matrix stack_draws(const std::vector<ChainOutput>& chains) {
    detail::require(!chains.empty(), "summarize: no chains");
    Index rows = 0;
    for (const auto& c : chains) rows += c.size();
    detail::require(rows > 0, "summarize: chains hold no stored draws");
    Matrix all(rows, chains.front().draws.cols());
    Index r = 0;
    for (const auto& c : chains) {
        all.middleRows(r, c.size()) = c.draws;
        r += c.size();
    }
    return all;
}

inline std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

inline PosteriorSummary summarize(const std::vector<ChainOutput>& chains, const BuiltModel& bm) {
    const Matrix all = stack_draws(chains);
    const DrawLayout& lay = chains.front().layout;
    PosteriorSummary s;
    s.draws = all.rows();
    s.chains = static_cast<int>(chains.size());
    s.threshold = bm.config.inclusion_threshold;
    for (const auto& c : chains) s.approximate = s.approximate || c.approximate;

    for (std::size_t i = 0; i < lay.blocks.size(); ++i) {
        const BlockColumns& bc = lay.blocks[i];
        const BlockSpec& bs = bm.model.predictors[static_cast<std::size_t>(bc.predictor)].blocks[static_cast<std::size_t>(bc.block)];
        double acc = 0.0;
        for (const auto& c : chains) acc += c.acceptance.empty() ? 0.0 : c.acceptance[i];
        s.acceptance.emplace_back(bc.label, acc / static_cast<double>(chains.size()));
        CoefficientSummary cs;
        cs.block = bc.label;
        column_bands(all.middleCols(bc.beta, bc.dim), cs.mean, cs.lower, cs.upper);
        s.coefficients.push_back(std::move(cs));
        if (bc.delta >= 0) {
            InclusionRow row;
            row.parameter = bm.model.predictors[static_cast<std::size_t>(bc.predictor)].name;
            row.block = bc.label;
            row.term = bc.term;
            row.probability = all.col(bc.delta).mean();
            row.selected = row.probability >= s.threshold;
            row.b = bs.hyper.b;
            row.r = bs.hyper.r;
            s.inclusion.push_back(row);
        }
    }

    for (const TermInfo& t : bm.terms) {
        EffectCurve curve;
        curve.term = t.label;
        Matrix grid;
        if (t.type == TermType::spatial || t.type == TermType::iid) {
            grid.resize(static_cast<Index>(t.levels.size()), 1);
            for (std::size_t l = 0; l < t.levels.size(); ++l) {
                grid(static_cast<Index>(l), 0) = static_cast<double>(l);
                curve.x.push_back(t.levels[l]);
            }
        } else {
            const int g = bm.config.grid_points;
            grid.resize(g, 1);
            for (int i = 0; i < g; ++i) {
                const double z = t.lower + (t.upper - t.lower) * static_cast<double>(i) / static_cast<double>(g - 1);
                grid(i, 0) = z;
                curve.x.push_back(format_double(z * t.scaling.sd + t.scaling.mean));
            }
        }
        Matrix f = Matrix::Zero(all.rows(), grid.rows());
        const auto& pred = bm.model.predictors[static_cast<std::size_t>(t.predictor)];
        for (std::size_t bi : t.blocks) {
            const EffectBlock& b = pred.blocks[bi].block;
            const BlockColumns* bc = lay.find(b.label);
            detail::require(bc != nullptr, "summarize: draws lack block '" + b.label + "'");
            f += all.middleCols(bc->beta, bc->dim) * b.evaluate(grid).transpose();
        }
        column_bands(f, curve.mean, curve.lower, curve.upper);
        s.curves.push_back(std::move(curve));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Information criteria and predictive scores

/// Predictors of every row of `m` at one stored draw.
inline RowMatrix predictor_at(const Model& m, const DrawLayout& lay, const Eigen::RowVectorXd& draw) {
    RowMatrix eta = RowMatrix::Zero(m.n(), static_cast<Index>(m.predictors.size()));
    for (const BlockColumns& bc : lay.blocks) {
        const EffectBlock& b = m.predictors[static_cast<std::size_t>(bc.predictor)].blocks[static_cast<std::size_t>(bc.block)].block;
        eta.col(bc.predictor) += b.B * Vector(draw.segment(bc.beta, bc.dim).transpose());
    }
    return eta;
}

inline ResponseFamily family_at(const Model& m, const DrawLayout& lay, const Eigen::RowVectorXd& draw) {
    ResponseFamily f = m.family;
    if (lay.sigma2 >= 0) f.sigma2 = draw(lay.sigma2);
    return f;
}

/// S x n matrix of pointwise log-likelihoods.
inline Matrix pointwise_loglik(const Model& m, const Matrix& draws, const DrawLayout& lay) {
    Matrix ll(draws.rows(), m.n());
    const auto yc = static_cast<std::size_t>(m.y.cols());
    for (Index s = 0; s < draws.rows(); ++s) {
        const RowMatrix eta = predictor_at(m, lay, draws.row(s));
        const ResponseFamily f = family_at(m, lay, draws.row(s));
        for (Index i = 0; i < m.n(); ++i) {
            ll(s, i) = log_density(f, std::span<const double>(m.y.data() + i * m.y.cols(), yc),
                                   std::span<const double>(eta.data() + i * eta.cols(), static_cast<std::size_t>(eta.cols())));
        }
    }
    return ll;
}

struct CvScores {
    int folds = 0;
    std::vector<int> fold_of_row;
    double log_score = 0.0;         ///< sum over rows of log p_hat(y_i)
    double quadratic_score = 0.0;   ///< sum of 2 p_hat(y_i) - int p_hat^2
    double spherical_score = 0.0;   ///< sum of p_hat(y_i) / sqrt(int p_hat^2)
};

struct ScoreReport {
    double dic = 0.0;
    double p_dic = 0.0;
    double waic = 0.0;
    double p_waic = 0.0;
    double lppd = 0.0;
    std::optional<CvScores> cv;
};

inline double log_mean_exp(const Eigen::Ref<const Vector>& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().mean());
}

/// DIC and WAIC from full-data draws.
inline ScoreReport information_criteria(const Model& m, const Matrix& draws, const DrawLayout& lay) {
    detail::require(draws.rows() > 0, "scores: no stored draws");
    ScoreReport r;
    const Matrix ll = pointwise_loglik(m, draws, lay);
    const Vector dev = -2.0 * ll.rowwise().sum();
    const Eigen::RowVectorXd mean_draw = draws.colwise().mean();
    Matrix md(1, draws.cols());
    md.row(0) = mean_draw;
    const double dev_at_mean = -2.0 * pointwise_loglik(m, md, lay).sum();
    r.p_dic = dev.mean() - dev_at_mean;
    r.dic = 2.0 * dev.mean() - dev_at_mean;
    for (Index i = 0; i < m.n(); ++i) {
        const Vector col = ll.col(i);
        r.lppd += log_mean_exp(col);
        if (col.size() > 1) {
            r.p_waic += (col.array() - col.mean()).square().sum() / static_cast<double>(col.size() - 1);
        }
    }
    r.waic = -2.0 * (r.lppd - r.p_waic);
    return r;
}

namespace detail {

inline EffectBlock subset_rows(const EffectBlock& b, const std::vector<Index>& rows) {
    EffectBlock out = b;
    if (const SparseMatrix* s = b.B.sparse()) {
        SparseMatrix sel(static_cast<Index>(rows.size()), b.n());
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t i = 0; i < rows.size(); ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(rows[i]), 1.0);
        sel.setFromTriplets(trip.begin(), trip.end());
        out.B = DesignMatrix(SparseMatrix(sel * *s));
    } else {
        out.B = DesignMatrix(Matrix((*b.B.dense())(rows, Eigen::all)));
    }
    return out;
}

inline Model subset_model(const Model& m, const std::vector<Index>& rows) {
    Model out;
    out.family = m.family;
    out.var_a = m.var_a;
    out.var_b = m.var_b;
    out.fixed_variance = m.fixed_variance;
    out.y = m.y(rows, Eigen::all);
    for (const auto& p : m.predictors) {
        Predictor q;
        q.name = p.name;
        for (const auto& bs : p.blocks) {
            BlockSpec c = bs;
            c.block = subset_rows(bs.block, rows);
            q.blocks.push_back(std::move(c));
        }
        out.predictors.push_back(std::move(q));
    }
    return out;
}

} // namespace detail

/// Balanced random fold labels, reproducible from the seed.
inline std::vector<int> assign_folds(Index n, int folds, std::uint64_t seed) {
    detail::require(folds >= 2 && folds <= n, "cross-validation: folds must lie in 2..n");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(seed, 0xC5);
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(rng.uniform() * static_cast<double>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(std::min(j, i))]);
    }
    std::vector<int> out(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = static_cast<int>(i % folds);
    return out;
}

/** Held-out scores of one test set from draws fitted without it. The
 * overlap integral of the predictive mixture uses at most `max_pairs_draws`
 * evenly spaced draws. */
inline void accumulate_heldout(const Model& test, const Matrix& draws, const DrawLayout& lay, CvScores& cv,
                               Index max_pairs_draws = 50) {
    const Index s_n = draws.rows();
    std::vector<RowMatrix> etas;
    std::vector<ResponseFamily> fams;
    for (Index s = 0; s < s_n; ++s) {
        etas.push_back(predictor_at(test, lay, draws.row(s)));
        fams.push_back(family_at(test, lay, draws.row(s)));
    }
    const Index sub = std::min(s_n, max_pairs_draws);
    std::vector<Index> pick;
    for (Index j = 0; j < sub; ++j) pick.push_back(j * s_n / sub);
    const auto yc = static_cast<std::size_t>(test.y.cols());
    const auto ec = static_cast<std::size_t>(test.predictors.size());
    Vector logp(s_n);
    for (Index i = 0; i < test.n(); ++i) {
        const std::span<const double> yi(test.y.data() + i * test.y.cols(), yc);
        for (Index s = 0; s < s_n; ++s) {
            logp(s) = log_density(fams[static_cast<std::size_t>(s)], yi,
                                  std::span<const double>(etas[static_cast<std::size_t>(s)].data() + i * static_cast<Index>(ec), ec));
        }
        const double lp = log_mean_exp(logp);
        double sq = 0.0;
        for (Index a = 0; a < sub; ++a) {
            const auto sa = static_cast<std::size_t>(pick[static_cast<std::size_t>(a)]);
            const std::span<const double> ea(etas[sa].data() + i * static_cast<Index>(ec), ec);
            for (Index b = a; b < sub; ++b) {
                const auto sb = static_cast<std::size_t>(pick[static_cast<std::size_t>(b)]);
                const double o = density_overlap(fams[sa], ea, fams[sb],
                                                 std::span<const double>(etas[sb].data() + i * static_cast<Index>(ec), ec));
                sq += (a == b ? 1.0 : 2.0) * o;
            }
        }
        sq /= static_cast<double>(sub * sub);
        const double p = std::exp(lp);
        cv.log_score += lp;
        cv.quadratic_score += 2.0 * p - sq;
        cv.spherical_score += p / std::sqrt(sq);
    }
}

/// K-fold cross-validated scores; folds refit concurrently on separate RNG streams.
inline CvScores cross_validate(const Model& m, const ChainConfig& chain, int folds) {
    CvScores cv;
    cv.folds = folds;
    cv.fold_of_row = assign_folds(m.n(), folds, chain.seed);
    std::vector<CvScores> parts(static_cast<std::size_t>(folds));
    parallel_for(parts.size(), [&](std::size_t f) {
        std::vector<Index> train, test;
        for (Index i = 0; i < m.n(); ++i) (cv.fold_of_row[static_cast<std::size_t>(i)] == static_cast<int>(f) ? test : train).push_back(i);
        detail::require(!train.empty(), "cross-validation: fold " + std::to_string(f) + " has an empty training set");
        const Model tr = detail::subset_model(m, train);
        const Model te = detail::subset_model(m, test);
        const ChainOutput out = run_chain(tr, chain, 1000 + f);
        detail::require_numeric(out.size() > 0, "cross-validation: fold chain stored no draws");
        accumulate_heldout(te, out.draws, out.layout, parts[f]);
    });
    for (const auto& p : parts) {
        cv.log_score += p.log_score;
        cv.quadratic_score += p.quadratic_score;
        cv.spherical_score += p.spherical_score;
    }
    return cv;
}

inline ScoreReport compute_scores(const BuiltModel& bm, const std::vector<ChainOutput>& chains, int folds) {
    ScoreReport r = information_criteria(bm.model, stack_draws(chains), chains.front().layout);
    if (folds >= 2) r.cv = cross_validate(bm.model, bm.config.chain, folds);
    return r;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr char kDrawsMagic[4] = {'N', 'B', 'P', 'S'};
inline constexpr std::uint32_t kDrawsVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& in, const std::string& what) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    require(static_cast<bool>(in), what + ": truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace detail

/** draws.bin: "NBPS", u32 version, u64 rows, u64 cols, then rows*cols
 * little-endian float64 in column-major order. */
inline void write_draws_bin(const std::filesystem::path& path, const Matrix& draws) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(out), "cannot write '" + path.string() + "'");
    out.write(kDrawsMagic, 4);
    detail::put_le<std::uint32_t>(out, kDrawsVersion);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(draws.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(draws.cols()));
    for (Index c = 0; c < draws.cols(); ++c) {
        for (Index r = 0; r < draws.rows(); ++r) detail::put_le<double>(out, draws(r, c));
    }
    detail::require(static_cast<bool>(out), "I/O failure writing '" + path.string() + "'");
}

inline Matrix read_draws_bin(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    detail::require(static_cast<bool>(in), "cannot open '" + path.string() + "'");
    char magic[4];
    in.read(magic, 4);
    detail::require(static_cast<bool>(in) && std::equal(magic, magic + 4, kDrawsMagic), path.string() + ": not a draws file");
    const auto version = detail::get_le<std::uint32_t>(in, path.string());
    detail::require(version == kDrawsVersion, path.string() + ": unsupported version " + std::to_string(version));
    const auto rows = detail::get_le<std::uint64_t>(in, path.string());
    const auto cols = detail::get_le<std::uint64_t>(in, path.string());
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index c = 0; c < m.cols(); ++c) {
        for (Index r = 0; r < m.rows(); ++r) m(r, c) = detail::get_le<double>(in, path.string());
    }
    return m;
}

inline nlohmann::json to_json(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline nlohmann::json draws_index(const std::vector<ChainOutput>& chains, const BuiltModel& bm) {
    nlohmann::json j;
    j["format"] = "magic 'NBPS', u32 version, u64 rows, u64 cols, then float64 column-major, little-endian";
    j["version"] = kDrawsVersion;
    j["columns"] = chains.front().layout.names;
    j["approximate"] = chains.front().approximate;
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : chains) {
        nlohmann::json e;
        e["seed"] = c.seed;
        e["stream"] = c.stream;
        e["rows"] = c.size();
        e["acceptance"] = c.acceptance;
        e["max_constraint_residual"] = c.max_constraint_residual;
        cs.push_back(e);
    }
    j["chains"] = cs;
    nlohmann::json hyper = nlohmann::json::object();
    for (const auto& p : bm.model.predictors) {
        for (const auto& bs : p.blocks) {
            if (bs.block.prior_kind == PriorKind::nbpss) hyper[bs.block.label] = {{"b", bs.hyper.b}, {"r", bs.hyper.r}};
        }
    }
    j["hyperparameters"] = hyper;
    return j;
}

/// Chains reconstructed from draws.bin and its side-car index.
inline std::vector<ChainOutput> read_chains(const std::filesystem::path& dir, BuiltModel& bm) {
    const nlohmann::json idx = nlohmann::json::parse(read_text_file(dir / "draws.json"));
    const Matrix all = read_draws_bin(dir / "draws.bin");
    const DrawLayout lay = draw_layout(bm.model);
    detail::require(idx.at("columns").get<std::vector<std::string>>() == lay.names,
                    "draws.json: columns do not match the model of the config");
    for (auto& p : bm.model.predictors) {
        for (auto& bs : p.blocks) {
            if (idx.at("hyperparameters").contains(bs.block.label)) {
                bs.hyper.b = idx["hyperparameters"][bs.block.label].at("b").get<double>();
                bs.hyper.r = idx["hyperparameters"][bs.block.label].at("r").get<double>();
            }
        }
    }
    std::vector<ChainOutput> out;
    Index row = 0;
    for (const auto& c : idx.at("chains")) {
        ChainOutput co;
        co.layout = lay;
        const auto rows = c.at("rows").get<Index>();
        detail::require(row + rows <= all.rows(), "draws.json: chain rows exceed draws.bin");
        co.draws = all.middleRows(row, rows);
        row += rows;
        co.seed = c.at("seed").get<std::uint64_t>();
        co.stream = c.at("stream").get<std::uint64_t>();
        co.acceptance = c.at("acceptance").get<std::vector<double>>();
        co.max_constraint_residual = c.at("max_constraint_residual").get<double>();
        co.approximate = idx.value("approximate", false);
        out.push_back(std::move(co));
    }
    return out;
}

inline nlohmann::json summary_json(const PosteriorSummary& s, const BuiltModel& bm) {
    nlohmann::json j;
    j["family"] = bm.model.family.name();
    j["draws"] = s.draws;
    j["chains"] = s.chains;
    j["inclusion_threshold"] = s.threshold;
    if (s.approximate) j["approximate"] = "MH correction disabled; draws are from the uncorrected IWLS chain";
    nlohmann::json inc = nlohmann::json::array();
    for (const auto& r : s.inclusion) {
        inc.push_back({{"parameter", r.parameter}, {"effect", r.block}, {"term", r.term}, {"inclusion_probability", r.probability},
                       {"selected", r.selected}, {"b", r.b}, {"r", r.r}});
    }
    j["inclusion"] = inc;
    nlohmann::json coef = nlohmann::json::array();
    for (const auto& c : s.coefficients) {
        coef.push_back({{"effect", c.block}, {"mean", to_json(c.mean)}, {"lower", to_json(c.lower)}, {"upper", to_json(c.upper)}});
    }
    j["coefficients"] = coef;
    nlohmann::json acc = nlohmann::json::object();
    for (const auto& [label, rate] : s.acceptance) acc[label] = rate;
    j["acceptance"] = acc;
    j["propriety"] = check_propriety(bm.model).verdict_line();
    nlohmann::json el = nlohmann::json::array();
    for (const auto& e : bm.elicited) {
        el.push_back({{"effect", e.block}, {"alpha", e.alpha}, {"c", e.c}, {"b", e.result.b}, {"r", e.result.r},
                      {"p_slab", e.result.p_slab}, {"p_spike", e.result.p_spike}});
    }
    j["elicitation"] = el;
    return j;
}

inline nlohmann::json scores_json(const ScoreReport& r) {
    nlohmann::json j;
    j["dic"] = r.dic;
    j["p_dic"] = r.p_dic;
    j["waic"] = r.waic;
    j["p_waic"] = r.p_waic;
    j["lppd"] = r.lppd;
    if (r.cv) {
        j["cv"] = {{"folds", r.cv->folds},
                   {"log_score", r.cv->log_score},
                   {"quadratic_score", r.cv->quadratic_score},
                   {"spherical_score", r.cv->spherical_score},
                   {"definitions",
                    "sums over held-out rows of log p(y), 2 p(y) - int p^2 and p(y) / sqrt(int p^2) for the posterior "
                    "predictive mixture p; larger is better"},
                   {"fold_of_row", r.cv->fold_of_row}};
    }
    return j;
}

inline std::string effect_file_name(const std::string& label) {
    std::string s = label;
    for (char& ch : s) {
        if (ch == '/' || ch == '\\' || ch == ' ' || ch == '(' || ch == ')') ch = '_';
    }
    return s + ".csv";
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(out), "cannot write '" + p.string() + "'");
    out << text;
    detail::require(static_cast<bool>(out), "I/O failure writing '" + p.string() + "'");
}

/// summary.json and effects/<term>.csv.
inline void write_summary(const PosteriorSummary& s, const BuiltModel& bm, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "effects");
    write_text(dir / "summary.json", summary_json(s, bm).dump(2) + "\n");
    for (const auto& c : s.curves) {
        std::ostringstream ss;
        ss.precision(17);
        ss << "x,mean,lo,hi\n";
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            const auto k = static_cast<Index>(i);
            ss << c.x[i] << "," << c.mean(k) << "," << c.lower(k) << "," << c.upper(k) << "\n";
        }
        write_text(dir / "effects" / effect_file_name(c.term), ss.str());
    }
}

inline void write_outputs(const PosteriorSummary& s, const std::optional<ScoreReport>& scores,
                          const std::vector<ChainOutput>& chains, const BuiltModel& bm, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_summary(s, bm, dir);
    write_draws_bin(dir / "draws.bin", stack_draws(chains));
    write_text(dir / "draws.json", draws_index(chains, bm).dump(2) + "\n");
    if (scores) write_text(dir / "scores.json", scores_json(*scores).dump(2) + "\n");
}

} // namespace nbpss
