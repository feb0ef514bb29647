#pragma once

#include "dataset.hpp"
#include "families.hpp"
#include "rng.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/distributions/normal.hpp>

#include <json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace nbpss {

namespace sim {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * boost::math::constants::pi<double>()); }

inline double f1(double x) { return x; }
inline double f2(double x) { return x + (2.0 * x - 2.0) * (2.0 * x - 2.0) / 5.5; }
inline double f3(double x) { return -x + boost::math::constants::pi<double>() * std::sin(boost::math::constants::pi<double>() * x); }
inline double f4(double x) { return 0.5 * x + 15.0 * phi(2.0 * (x - 0.2)) - phi(x + 0.4); }

inline double test_function(int which, double x) {
    switch (which) {
        case 1: return f1(x);
        case 2: return f2(x);
        case 3: return f3(x);
        case 4: return f4(x);
        default: return 0.0;
    }
}

/// 10 x 10 lattice with rook neighbours; regions "r0".."r99" row by row.
inline RegionGraph lattice_graph(int side = 10) {
    RegionGraph g;
    const int s = side * side;
    for (int i = 0; i < s; ++i) g.nodes.push_back("r" + std::to_string(i));
    g.adjacency = Matrix::Zero(s, s);
    for (int row = 0; row < side; ++row) {
        for (int col = 0; col < side; ++col) {
            const int i = row * side + col;
            if (col + 1 < side) g.adjacency(i, i + 1) = g.adjacency(i + 1, i) = 1.0;
            if (row + 1 < side) g.adjacency(i, i + side) = g.adjacency(i + side, i) = 1.0;
        }
    }
    return g;
}

/// Smooth surface over lattice centroids, centred over regions.
inline Vector spatial_truth(int side = 10) {
    const double pi = boost::math::constants::pi<double>();
    Vector f(side * side);
    for (int row = 0; row < side; ++row) {
        for (int col = 0; col < side; ++col) {
            const double u = 2.0 * col / (side - 1.0) - 1.0;
            const double v = 2.0 * row / (side - 1.0) - 1.0;
            f(row * side + col) = 1.5 * std::sin(pi * u) * std::cos(0.5 * pi * v) + u * v;
        }
    }
    return f.array() - f.mean();
}

} // namespace sim

/// One additive predictor of a scenario: offset + scale * (sum_j weight_j f_{which_j}(x_j) + f_spat).
struct TruthPredictor {
    std::string parameter;
    double offset = 0.0;
    double scale = 1.0;
    int covariates = 0;                         ///< x1..x{covariates} enter the fitted model
    std::vector<std::pair<int, double>> terms;  ///< (function index 1..4, weight) for x1, x2, ...
};

struct Scenario {
    std::string id;
    std::string family;
    std::vector<TruthPredictor> predictors;
    double noise_sd = 1.0;   ///< Gaussian family only
};

inline std::vector<std::string> scenario_ids() {
    return {"high-sparsity-gaussian", "low-sparsity-gaussian", "high-sparsity-poisson", "low-sparsity-poisson",
            "locscale-gaussian", "zip"};
}

inline Scenario make_scenario(const std::string& id) {
    auto high = [](std::string p, double offset, double scale) {
        TruthPredictor t{std::move(p), offset, scale, 8, {{1, 1.0}, {2, 1.0}, {3, 1.0}, {4, 1.0}}};
        return t;
    };
    auto low = [](std::string p, double offset, double scale) {
        TruthPredictor t{std::move(p), offset, scale, 16, {}};
        for (double w : {1.0, 1.5, 2.0}) {
            for (int f = 1; f <= 4; ++f) t.terms.emplace_back(f, w);
        }
        return t;
    };
    Scenario s;
    s.id = id;
    if (id == "high-sparsity-gaussian") {
        s.family = "gaussian";
        s.predictors = {high("mu", 0.0, 1.0)};
    } else if (id == "low-sparsity-gaussian") {
        s.family = "gaussian";
        s.predictors = {low("mu", 0.0, 1.0)};
    } else if (id == "high-sparsity-poisson") {
        s.family = "poisson";
        s.predictors = {high("lambda", 0.5, 0.15)};
    } else if (id == "low-sparsity-poisson") {
        s.family = "poisson";
        s.predictors = {low("lambda", 0.5, 0.1)};
    } else if (id == "locscale-gaussian") {
        s.family = "gaussian_locscale";
        s.predictors = {low("mu", 0.0, 1.0), high("sigma2", 0.0, 0.1)};
    } else if (id == "zip") {
        s.family = "zip";
        s.predictors = {low("lambda", 0.5, 0.1), high("pi", -1.0, 0.2)};
    } else {
        std::string known;
        for (const auto& k : scenario_ids()) known += (known.empty() ? "" : ", ") + k;
        throw ConfigError("unknown scenario '" + id + "' (known: " + known + ")");
    }
    return s;
}

struct SimulatedData {
    Scenario scenario;
    Index n = 0;
    Matrix x;                             ///< n x p covariates on the generated (unstandardized) scale
    std::vector<std::string> region;      ///< empty unless spatial
    RowMatrix y;
    RowMatrix eta;                        ///< true predictors
    nlohmann::json truth;
};

/** Draws covariates (i.i.d. U[-2, 2], or AR(1) across the covariate index
 * with rho = 0.7 mapped to U[-2, 2] through the normal CDF), evaluates the true
 * predictors and samples responses. */
inline SimulatedData generate_scenario(const std::string& id, Index n, bool correlated, bool spatial, std::uint64_t seed) {
    detail::require(n >= 50, "simulate: n must be at least 50");
    SimulatedData d;
    d.scenario = make_scenario(id);
    d.n = n;
    const ResponseFamily fam = ResponseFamily::from_name(d.scenario.family);
    int p = 0;
    for (const auto& tp : d.scenario.predictors) p = std::max(p, tp.covariates);
    Rng rng(seed);
    d.x.resize(n, p);
    const boost::math::normal_distribution<double> std_normal;
    constexpr double rho = 0.7;
    for (Index i = 0; i < n; ++i) {
        double z = rng.normal();
        for (int j = 0; j < p; ++j) {
            if (correlated) {
                if (j > 0) z = rho * z + std::sqrt(1.0 - rho * rho) * rng.normal();
                d.x(i, j) = 4.0 * boost::math::cdf(std_normal, z) - 2.0;
            } else {
                d.x(i, j) = 4.0 * rng.uniform() - 2.0;
            }
        }
    }
    const Vector fspat = sim::spatial_truth();
    std::vector<int> reg;
    if (spatial) {
        for (Index i = 0; i < n; ++i) {
            const int r = std::min(99, static_cast<int>(rng.uniform() * 100.0));
            reg.push_back(r);
            d.region.push_back("r" + std::to_string(r));
        }
    }
    const auto kpar = static_cast<Index>(d.scenario.predictors.size());
    d.eta = RowMatrix::Zero(n, kpar);
    for (Index k = 0; k < kpar; ++k) {
        const auto& tp = d.scenario.predictors[static_cast<std::size_t>(k)];
        for (Index i = 0; i < n; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < tp.terms.size(); ++j) {
                v += tp.terms[j].second * sim::test_function(tp.terms[j].first, d.x(i, static_cast<Index>(j)));
            }
            if (spatial) v += fspat(reg[static_cast<std::size_t>(i)]);
            d.eta(i, k) = tp.offset + tp.scale * v;
        }
    }
    ResponseFamily draw_fam = fam;
    draw_fam.sigma2 = d.scenario.noise_sd * d.scenario.noise_sd;
    d.y.resize(n, fam.response_dim());
    for (Index i = 0; i < n; ++i) {
        const auto rec = sample_response(draw_fam, std::span<const double>(d.eta.data() + i * kpar, static_cast<std::size_t>(kpar)), rng);
        for (std::size_t c = 0; c < rec.size(); ++c) d.y(i, static_cast<Index>(c)) = rec[c];
    }

    nlohmann::json t;
    t["scenario"] = id;
    t["family"] = d.scenario.family;
    t["n"] = n;
    t["seed"] = seed;
    t["correlated"] = correlated;
    t["spatial"] = spatial;
    if (fam.kind == FamilyKind::gaussian) t["noise_sd"] = d.scenario.noise_sd;
    t["functions"] = {{"f1", "x"}, {"f2", "x + (2x - 2)^2 / 5.5"}, {"f3", "-x + pi sin(pi x)"},
                      {"f4", "0.5x + 15 phi(2(x - 0.2)) - phi(x + 0.4), phi the standard normal density"}};
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& tp : d.scenario.predictors) {
        nlohmann::json pj;
        pj["parameter"] = tp.parameter;
        pj["offset"] = tp.offset;
        pj["scale"] = tp.scale;
        nlohmann::json effects = nlohmann::json::array();
        for (int j = 0; j < tp.covariates; ++j) {
            const std::string cov = "x" + std::to_string(j + 1);
            const bool active = static_cast<std::size_t>(j) < tp.terms.size();
            const int f = active ? tp.terms[static_cast<std::size_t>(j)].first : 0;
            effects.push_back({{"covariate", cov},
                               {"function", active ? "f" + std::to_string(f) : "zero"},
                               {"weight", active ? tp.terms[static_cast<std::size_t>(j)].second : 0.0},
                               {"linear_nonzero", active},
                               {"nonlinear_nonzero", active && f != 1}});
        }
        if (spatial) {
            effects.push_back({{"covariate", "region"}, {"function", "f_spat"}, {"weight", 1.0},
                               {"linear_nonzero", false}, {"nonlinear_nonzero", true}});
        }
        pj["effects"] = effects;
        preds.push_back(pj);
    }
    t["predictors"] = preds;
    if (spatial) {
        t["spatial_surface"] = "1.5 sin(pi u) cos(pi v / 2) + u v over lattice centroids u, v in [-1, 1], centred";
        std::vector<double> fs(fspat.data(), fspat.data() + fspat.size());
        t["spatial_values"] = fs;
    }
    d.truth = t;
    return d;
}

/// A fitting configuration selecting over every generated covariate of every predictor.
inline nlohmann::json scenario_config(const SimulatedData& d, std::uint64_t seed) {
    const ResponseFamily fam = ResponseFamily::from_name(d.scenario.family);
    nlohmann::json c;
    c["family"] = d.scenario.family;
    c["data"] = "data.csv";
    c["response"] = fam.response_dim() == 1 ? nlohmann::json("y") : nlohmann::json({"y1", "y2"});
    if (!d.region.empty()) c["adjacency"] = {{"nodes", "nodes.txt"}, {"edges", "edges.txt"}};
    nlohmann::json preds = nlohmann::json::object();
    for (const auto& tp : d.scenario.predictors) {
        nlohmann::json terms = nlohmann::json::array();
        for (int j = 0; j < tp.covariates; ++j) {
            terms.push_back({{"covariate", "x" + std::to_string(j + 1)}, {"type", "spline"}});
        }
        if (!d.region.empty()) terms.push_back({{"covariate", "region"}, {"type", "spatial"}});
        preds[tp.parameter] = terms;
    }
    c["predictors"] = preds;
    c["chain"] = {{"seed", seed}};
    return c;
}

/// Writes data.csv, truth.json, model.json and, for spatial scenarios, nodes.txt and edges.txt.
inline void write_scenario(const SimulatedData& d, const std::filesystem::path& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "data.csv", std::ios::trunc);
    detail::require(static_cast<bool>(csv), "cannot write '" + (dir / "data.csv").string() + "'");
    csv.precision(17);
    if (d.y.cols() == 1) {
        csv << "y";
    } else {
        for (Index c = 0; c < d.y.cols(); ++c) csv << (c ? "," : "") << "y" << (c + 1);
    }
    for (Index j = 0; j < d.x.cols(); ++j) csv << ",x" << (j + 1);
    if (!d.region.empty()) csv << ",region";
    csv << "\n";
    for (Index i = 0; i < d.n; ++i) {
        for (Index c = 0; c < d.y.cols(); ++c) csv << (c ? "," : "") << d.y(i, c);
        for (Index j = 0; j < d.x.cols(); ++j) csv << "," << d.x(i, j);
        if (!d.region.empty()) csv << "," << d.region[static_cast<std::size_t>(i)];
        csv << "\n";
    }
    detail::require(static_cast<bool>(csv), "I/O failure writing data.csv");
    std::ofstream(dir / "truth.json", std::ios::trunc) << d.truth.dump(2) << "\n";
    std::ofstream(dir / "model.json", std::ios::trunc) << scenario_config(d, seed).dump(2) << "\n";
    if (!d.region.empty()) {
        const RegionGraph g = sim::lattice_graph();
        std::ofstream nodes(dir / "nodes.txt", std::ios::trunc), edges(dir / "edges.txt", std::ios::trunc);
        for (const auto& node : g.nodes) nodes << node << "\n";
        for (Index i = 0; i < g.size(); ++i) {
            for (Index j = i + 1; j < g.size(); ++j) {
                if (g.adjacency(i, j) != 0.0) edges << g.nodes[static_cast<std::size_t>(i)] << " " << g.nodes[static_cast<std::size_t>(j)] << "\n";
            }
        }
    }
}

/// In-memory table of a simulated dataset, matching the written data.csv.
inline Table scenario_table(const SimulatedData& d) {
    Table t;
    auto add = [&](const std::string& name, std::vector<std::string> col) {
        t.names.push_back(name);
        t.columns.push_back(std::move(col));
    };
    auto num = [](double v) {
        std::ostringstream ss;
        ss.precision(17);
        ss << v;
        return ss.str();
    };
    for (Index c = 0; c < d.y.cols(); ++c) {
        std::vector<std::string> col;
        for (Index i = 0; i < d.n; ++i) col.push_back(num(d.y(i, c)));
        add(d.y.cols() == 1 ? "y" : "y" + std::to_string(c + 1), std::move(col));
    }
    for (Index j = 0; j < d.x.cols(); ++j) {
        std::vector<std::string> col;
        for (Index i = 0; i < d.n; ++i) col.push_back(num(d.x(i, j)));
        add("x" + std::to_string(j + 1), std::move(col));
    }
    if (!d.region.empty()) add("region", d.region);
    return t;
}

} // namespace nbpss
