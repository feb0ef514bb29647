#pragma once

#include "engine_io.hpp"
#include "simulate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iomanip>
#include <iostream>
#include <string>

namespace nbpss {

namespace detail {

inline void print_report(const ProprietyReport& rep, std::ostream& out) {
    out << std::left << std::setw(14) << "condition" << std::setw(26) << "subject" << std::setw(15) << "status"
        << std::setw(11) << "sufficient" << "detail\n";
    for (const auto& c : rep.conditions) {
        std::ostringstream det;
        det << c.lhs << " vs " << c.rhs;
        if (!c.note.empty()) det << "; " << c.note;
        out << std::left << std::setw(14) << c.id << std::setw(26) << c.subject << std::setw(15) << to_string(c.status)
            << std::setw(11) << (c.in_sufficient_set ? "yes" : "no") << det.str() << "\n";
    }
    out << "verdict: " << rep.verdict_line() << "\n";
}

inline nlohmann::json elicitation_json(const BuiltModel& bm) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : bm.elicited) {
        arr.push_back({{"effect", e.block}, {"alpha", e.alpha}, {"c", e.c}, {"b", e.result.b}, {"r", e.result.r},
                       {"p_slab", e.result.p_slab}, {"p_spike", e.result.p_spike}});
    }
    return {{"elicitation", arr}};
}

} // namespace detail

/** Parses argv and runs one subcommand. Returns 0 on success, 1 on a
 * configuration error and 2 on a numerical failure. */
inline int main_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Bayesian effect selection in structured additive distributional regression"};
    app.require_subcommand(1);
    app.fallthrough();
    int verbosity = 0;
    app.add_flag("-v,--verbose", verbosity, "more diagnostics on stderr (repeat for more)");

    std::string config, out_dir, scenario = "high-sparsity-gaussian";
    std::uint64_t seed = 0;
    int chains = 0;
    long n = 1000;
    bool correlated = false, spatial = false, no_mh = false;

    auto add_config = [&](CLI::App* s, bool required) {
        auto* o = s->add_option("-c,--config", config, "model configuration (JSON)");
        if (required) o->required();
    };
    CLI::App* fit = app.add_subcommand("fit", "elicit hyperparameters, run chains, write summaries and draws");
    add_config(fit, true);
    fit->add_option("-o,--out", out_dir, "output directory")->required();
    fit->add_option("--seed", seed, "override the chain seed");
    fit->add_option("--chains", chains, "number of chains (default from config, else 1)");
    fit->add_flag("--no-mh-correction", no_mh, "accept every IWLS proposal (approximate, diagnostic only)");

    CLI::App* eli = app.add_subcommand("elicit", "solve (b, r) for every selected effect and print them as JSON");
    add_config(eli, true);
    eli->add_option("-o,--out", out_dir, "write elicitation.json into this directory instead of stdout");
    eli->add_option("--seed", seed, "override the elicitation seed");

    CLI::App* simc = app.add_subcommand("simulate", "generate a simulation-study dataset");
    simc->add_option("--scenario", scenario, "scenario id");
    simc->add_option("--n", n, "number of observations");
    simc->add_option("--seed", seed, "random seed");
    simc->add_flag("--correlated", correlated, "AR(1)-correlated covariates");
    simc->add_flag("--spatial", spatial, "add a spatial effect on a 10 x 10 lattice");
    simc->add_option("-o,--out", out_dir, "output directory")->required();

    CLI::App* summ = app.add_subcommand("summarize", "recompute summaries from draws.bin in the output directory");
    add_config(summ, true);
    summ->add_option("-o,--out", out_dir, "directory holding draws.bin and draws.json")->required();

    CLI::App* chk = app.add_subcommand("check", "print the posterior propriety report");
    add_config(chk, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    auto log = [&](int level, const std::string& msg) {
        if (verbosity >= level) err << "[nbpss] " << msg << "\n";
    };
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    try {
        if (*fit) {
            std::optional<std::uint64_t> seed_override;
            if (fit->count("--seed")) seed_override = seed;
            BuiltModel bm = load_model(config, {}, seed_override);
            if (no_mh) bm.config.chain.mh_correction = false;
            if (chains > 0) bm.config.chains = chains;
            log(1, "model built: " + std::to_string(bm.model.n()) + " rows, " + std::to_string(bm.elicited.size()) +
                       " elicited effects (" + std::to_string(elapsed()) + " s)");
            const ProprietyReport rep = check_propriety(bm.model);
            if (rep.verdict == Verdict::violated) err << "warning: posterior propriety " << rep.verdict_line() << "\n";
            const auto outs = run_chains(bm.model, bm.config.chain, bm.config.chains);
            log(1, "sampling done (" + std::to_string(elapsed()) + " s)");
            const PosteriorSummary s = summarize(outs, bm);
            if (verbosity >= 2) {
                for (const auto& [label, rate] : s.acceptance) log(2, "acceptance " + label + " = " + std::to_string(rate));
            }
            const ScoreReport scores = compute_scores(bm, outs, bm.config.cv_folds);
            write_outputs(s, scores, outs, bm, out_dir);
            log(1, "outputs written (" + std::to_string(elapsed()) + " s)");
            out << "fit: " << s.draws << " draws from " << s.chains << " chain(s) written to " << out_dir << "\n";
            for (const auto& r : s.inclusion) {
                out << "  " << std::left << std::setw(28) << r.block << " P(delta|y) = " << std::fixed << std::setprecision(3)
                    << r.probability << (r.selected ? "  selected" : "") << std::defaultfloat << "\n";
            }
            if (!bm.config.chain.mh_correction) out << "  (approximate: MH correction disabled)\n";
        } else if (*eli) {
            ModelConfig cfg = parse_model_config(read_text_file(config), std::filesystem::path(config).parent_path());
            if (eli->count("--seed")) cfg.elicitation_seed = seed;
            std::optional<RegionGraph> graph;
            if (cfg.nodes) graph = load_graph(*cfg.nodes, *cfg.edges);
            const BuiltModel bm = build_model(cfg, load_csv(cfg.data), graph);
            const std::string doc = detail::elicitation_json(bm).dump(2) + "\n";
            if (out_dir.empty()) {
                out << doc;
            } else {
                std::filesystem::create_directories(out_dir);
                write_text(std::filesystem::path(out_dir) / "elicitation.json", doc);
            }
        } else if (*simc) {
            const SimulatedData d = generate_scenario(scenario, n, correlated, spatial, seed);
            write_scenario(d, out_dir, seed);
            out << "simulate: " << scenario << " with n = " << n << ", " << d.x.cols() << " covariates written to " << out_dir
                << "\n";
        } else if (*summ) {
            BuiltModel bm = load_model(config, BuildOptions{false});
            const auto outs = read_chains(out_dir, bm);
            const PosteriorSummary s = summarize(outs, bm);
            write_summary(s, bm, out_dir);
            out << "summarize: " << s.draws << " draws summarized into " << out_dir << "\n";
        } else if (*chk) {
            const BuiltModel bm = load_model(config, BuildOptions{false});
            detail::print_report(check_propriety(bm.model), out);
        }
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace nbpss
