#pragma once

#include "errors.hpp"
#include "families.hpp"
#include "sampler.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nbpss {

enum class TermType { linear, spline, spatial, iid };

inline const char* to_string(TermType t) {
    switch (t) {
        case TermType::linear: return "linear";
        case TermType::spline: return "spline";
        case TermType::spatial: return "spatial";
        case TermType::iid: return "iid";
    }
    return "?";
}

struct TermConfig {
    std::string covariate;
    TermType type = TermType::spline;
    std::string label;             ///< defaults to the covariate name
    bool select = true;            ///< NBPSS prior when true, IG (or flat for linear) otherwise
    bool decompose = true;         ///< split a selected rw2 spline into linear and non-linear parts
    int knots = 20;
    int degree = 3;
    int rw_order = 2;
    double a = 5.0;
    std::optional<double> b;
    std::optional<double> r;
    double alpha = 0.1;
    double c = 0.1;
    double a0 = 1.0;
    double b0 = 1.0;
    std::optional<double> omega;
    std::optional<std::string> group;
    double ig_a = 0.001;
    double ig_b = 0.001;

    bool elicited() const { return select && !b; }
};

struct PredictorConfig {
    std::string parameter;
    std::vector<TermConfig> terms;
};

struct ModelConfig {
    std::string family = "gaussian";
    std::filesystem::path data;
    std::vector<std::string> response;
    std::optional<std::filesystem::path> nodes;
    std::optional<std::filesystem::path> edges;
    std::vector<PredictorConfig> predictors;   ///< in the family's parameter order
    bool intercept = true;
    bool standardize = true;
    double var_a = 0.001;
    double var_b = 0.001;
    std::optional<double> fixed_variance;
    ChainConfig chain;
    int chains = 1;
    int elicitation_draws = 10000;
    std::optional<std::uint64_t> elicitation_seed;
    double inclusion_threshold = 0.5;
    int cv_folds = 0;
    int grid_points = 200;
};

namespace detail {

/// Object walker that tracks a JSON path and rejects unread keys.
class JsonObject {
public:
    JsonObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j.is_object(), path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string at(const std::string& key) const { return path_ + "." + key; }

    const nlohmann::json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <class T>
    std::optional<T> opt(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return get<T>(key);
    }

    template <class T>
    T get(const std::string& key) {
        require(has(key), at(key) + ": required key is missing");
        const auto& v = raw(key);
        if constexpr (std::is_same_v<T, bool>) {
            require(v.is_boolean(), at(key) + ": expected true or false");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            require(v.is_string(), at(key) + ": expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
                    at(key) + ": expected a non-negative integer");
            return v.get<std::uint64_t>();
        } else if constexpr (std::is_integral_v<T>) {
            require(v.is_number_integer(), at(key) + ": expected an integer");
            return v.get<T>();
        } else {
            require(v.is_number(), at(key) + ": expected a number");
            const double d = v.get<double>();
            require(std::isfinite(d), at(key) + ": expected a finite number");
            return d;
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            require(seen_.count(it.key()) > 0, at(it.key()) + ": unknown key");
        }
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline TermType parse_term_type(const std::string& s, const std::string& path) {
    if (s == "linear") return TermType::linear;
    if (s == "spline") return TermType::spline;
    if (s == "spatial") return TermType::spatial;
    if (s == "iid") return TermType::iid;
    throw ConfigError(path + ": unknown term type '" + s + "' (linear, spline, spatial, iid)");
}

inline TermConfig parse_term(const nlohmann::json& j, const std::string& path) {
    JsonObject o(j, path);
    TermConfig t;
    t.covariate = o.get<std::string>("covariate");
    if (auto v = o.opt<std::string>("type")) t.type = parse_term_type(*v, o.at("type"));
    t.label = o.opt<std::string>("label").value_or(t.covariate);
    require(!t.label.empty(), o.at("label") + ": must not be empty");
    t.select = o.opt<bool>("select").value_or(true);
    t.decompose = o.opt<bool>("decompose").value_or(t.select && t.type == TermType::spline);
    t.knots = o.opt<int>("knots").value_or(20);
    t.degree = o.opt<int>("degree").value_or(3);
    t.rw_order = o.opt<int>("rw_order").value_or(2);
    require(t.knots >= 2, o.at("knots") + ": need at least 2 interior knots");
    require(t.degree >= 1 && t.degree <= 5, o.at("degree") + ": must lie in 1..5");
    require(t.rw_order == 1 || t.rw_order == 2, o.at("rw_order") + ": must be 1 or 2");
    t.a = o.opt<double>("a").value_or(5.0);
    t.b = o.opt<double>("b");
    t.r = o.opt<double>("r");
    const auto alpha = o.opt<double>("alpha");
    const auto c = o.opt<double>("c");
    require(t.b.has_value() == t.r.has_value(), path + ": 'b' and 'r' must be given together");
    require(!(t.b && (alpha || c)), path + ": give either (b, r) or (alpha, c), not both");
    t.alpha = alpha.value_or(0.1);
    t.c = c.value_or(0.1);
    t.a0 = o.opt<double>("a0").value_or(1.0);
    t.b0 = o.opt<double>("b0").value_or(1.0);
    t.omega = o.opt<double>("omega");
    t.group = o.opt<std::string>("group");
    t.ig_a = o.opt<double>("ig_a").value_or(0.001);
    t.ig_b = o.opt<double>("ig_b").value_or(0.001);
    o.finish();

    require(t.a > 0.0, path + ".a: must be positive");
    if (t.b) {
        require(*t.b > 0.0, path + ".b: must be positive");
        require(*t.r > 0.0 && *t.r < 1.0, path + ".r: must lie in (0, 1)");
    }
    require(t.alpha > 0.0 && t.alpha < 0.5, path + ".alpha: must lie in (0, 0.5)");
    require(t.c > 0.0, path + ".c: must be positive");
    require(t.a0 > 0.0 && t.b0 > 0.0, path + ": a0 and b0 must be positive");
    if (t.omega) require(*t.omega > 0.0 && *t.omega <= 1.0, path + ".omega: must lie in (0, 1]");
    require(t.ig_b >= 0.0, path + ".ig_b: must be non-negative");
    require(!t.decompose || t.type == TermType::spline, path + ".decompose: only spline terms can be decomposed");
    return t;
}

} // namespace detail

/** Parses a model configuration. Relative file paths are resolved against `base_dir`. */
inline ModelConfig parse_model_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    detail::JsonObject o(j, "$");
    ModelConfig cfg;
    cfg.family = o.opt<std::string>("family").value_or("gaussian");
    const ResponseFamily fam = ResponseFamily::from_name(cfg.family);
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    if (o.has("data")) cfg.data = resolve(o.get<std::string>("data"));

    detail::require(o.has("response"), "$.response: required key is missing");
    const auto& resp = o.raw("response");
    if (resp.is_string()) {
        cfg.response.push_back(resp.get<std::string>());
    } else {
        detail::require(resp.is_array(), "$.response: expected a column name or a list of names");
        for (const auto& r : resp) {
            detail::require(r.is_string(), "$.response: expected column names");
            cfg.response.push_back(r.get<std::string>());
        }
    }
    detail::require(static_cast<int>(cfg.response.size()) == fam.response_dim(),
                    "$.response: family '" + cfg.family + "' needs " + std::to_string(fam.response_dim()) +
                        " response column(s)");

    if (o.has("adjacency")) {
        detail::JsonObject adj(o.raw("adjacency"), "$.adjacency");
        cfg.nodes = resolve(adj.get<std::string>("nodes"));
        cfg.edges = resolve(adj.get<std::string>("edges"));
        adj.finish();
    }

    detail::require(o.has("predictors"), "$.predictors: required key is missing");
    detail::JsonObject preds(o.raw("predictors"), "$.predictors");
    for (const auto& name : fam.parameter_names()) {
        PredictorConfig pc;
        pc.parameter = name;
        if (preds.has(name)) {
            const auto& terms = preds.raw(name);
            const std::string path = preds.at(name);
            detail::require(terms.is_array(), path + ": expected a list of terms");
            for (std::size_t i = 0; i < terms.size(); ++i) {
                pc.terms.push_back(detail::parse_term(terms[i], path + "[" + std::to_string(i) + "]"));
            }
        }
        cfg.predictors.push_back(std::move(pc));
    }
    preds.finish();
    std::set<std::string> labels;
    for (const auto& p : cfg.predictors) {
        for (const auto& t : p.terms) {
            detail::require(labels.insert(p.parameter + "/" + t.label).second,
                            "$.predictors." + p.parameter + ": duplicate term label '" + t.label + "'");
        }
    }

    cfg.intercept = o.opt<bool>("intercept").value_or(true);
    cfg.standardize = o.opt<bool>("standardize").value_or(true);

    if (o.has("variance_prior")) {
        detail::JsonObject vp(o.raw("variance_prior"), "$.variance_prior");
        cfg.var_a = vp.opt<double>("a").value_or(0.001);
        cfg.var_b = vp.opt<double>("b").value_or(0.001);
        cfg.fixed_variance = vp.opt<double>("fixed");
        vp.finish();
        detail::require(cfg.var_b >= 0.0, "$.variance_prior.b: must be non-negative");
        if (cfg.fixed_variance) detail::require(*cfg.fixed_variance > 0.0, "$.variance_prior.fixed: must be positive");
    }

    if (o.has("chain")) {
        detail::JsonObject ch(o.raw("chain"), "$.chain");
        cfg.chain.iterations = ch.opt<long>("iterations").value_or(cfg.chain.iterations);
        cfg.chain.burn_in = ch.opt<long>("burn_in").value_or(cfg.chain.burn_in);
        cfg.chain.thin = ch.opt<long>("thin").value_or(cfg.chain.thin);
        cfg.chain.seed = ch.opt<std::uint64_t>("seed").value_or(cfg.chain.seed);
        cfg.chain.mh_correction = ch.opt<bool>("mh_correction").value_or(true);
        cfg.chains = ch.opt<int>("chains").value_or(1);
        ch.finish();
        detail::require(cfg.chains >= 1, "$.chain.chains: must be at least 1");
    }
    try {
        cfg.chain.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("$.chain: ") + e.what());
    }

    if (o.has("elicitation")) {
        detail::JsonObject el(o.raw("elicitation"), "$.elicitation");
        cfg.elicitation_draws = el.opt<int>("draws").value_or(10000);
        cfg.elicitation_seed = el.opt<std::uint64_t>("seed");
        el.finish();
        detail::require(cfg.elicitation_draws >= 1000, "$.elicitation.draws: need at least 1000");
    }
    cfg.inclusion_threshold = o.opt<double>("inclusion_threshold").value_or(0.5);
    detail::require(cfg.inclusion_threshold > 0.0 && cfg.inclusion_threshold < 1.0,
                    "$.inclusion_threshold: must lie in (0, 1)");
    cfg.cv_folds = o.opt<int>("cv_folds").value_or(0);
    detail::require(cfg.cv_folds == 0 || cfg.cv_folds >= 2, "$.cv_folds: use 0 (off) or at least 2");
    cfg.grid_points = o.opt<int>("grid_points").value_or(200);
    detail::require(cfg.grid_points >= 2, "$.grid_points: need at least 2");
    o.finish();
    return cfg;
}

} // namespace nbpss
