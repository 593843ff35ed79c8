// fedstyle_cli: data generation, federated training, evaluation and diagnostics.

#include "fedstyle/eval/evaluation.hpp"
#include "fedstyle/fl/engine.hpp"
#include "fedstyle/loss/gradcheck_suite.hpp"
#include "fedstyle/loss/oracles.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace fedstyle;

namespace {

std::string kebab(std::string s) {
    for (char& c : s)
        if (c == '_') c = '-';
    return s;
}

/// Registers --config plus one --<key> flag per configuration key.
struct ConfigFlags {
    std::string config_path;
    std::vector<std::string> sets;
    std::vector<std::uint64_t> seed;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config_path, "Configuration file (.toml-style key = value, or .json)");
        app->add_option("--set", sets, "Extra key=value override (repeatable)");
        app->add_option("--seed", seed, "Run seed (repeatable; replaces 'seeds')");
        for (const auto& key : fl::config_keys())
            options[key] = app->add_option("--" + kebab(key), values[key], "Override '" + key + "'");
    }

    fl::ExperimentConfig resolve(const std::string& fallback_path = {}) const {
        fl::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = fl::load_config(config_path);
        else if (!fallback_path.empty() && fs::exists(fallback_path)) cfg = fl::load_config(fallback_path);
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) fl::apply_override(cfg, key, values.at(key));
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw fl::ConfigError("--set expects key=value, got '" + kv + "'");
            fl::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!seed.empty()) cfg.seeds = seed;
        if (const char* root = std::getenv("FEDSTYLE_OUTPUT_ROOT"); root && fs::path(cfg.output_dir).is_relative())
            cfg.output_dir = (fs::path(root) / cfg.output_dir).string();
        fl::validate(cfg);
        return cfg;
    }
};

std::vector<eval::ResultRow> evaluate(const fl::Simulation& sim, const std::vector<data::StyleDataset>& datasets) {
    auto rows = eval::eval_generalization(sim, datasets);
    for (auto& r : eval::eval_personalization(sim)) rows.push_back(std::move(r));
    return rows;
}

void print_rows(const std::vector<eval::ResultRow>& rows) {
    for (const auto& r : rows)
        std::printf("  %-8s style %d client %-6s acc %.4f\n", r.client == "global" ? "general" : "personal", r.style,
                    r.client.c_str(), r.accuracy);
}

// A simulation restored from <run_dir>/final with the run's config snapshot.
struct Restored {
    fl::ExperimentConfig cfg;
    std::vector<data::StyleDataset> datasets;
    std::unique_ptr<fl::Simulation> sim;
};

Restored restore(const ConfigFlags& flags, const fs::path& run_dir) {
    Restored r;
    r.cfg = flags.resolve((run_dir / "config.toml").string());
    const std::uint64_t seed = r.cfg.seeds.front();
    r.datasets = fl::build_datasets(r.cfg, seed);
    // Style pretraining is redone and then overwritten by the checkpoint.
    r.sim = std::make_unique<fl::Simulation>(r.cfg, fl::build_shards(r.cfg, r.datasets, seed), seed);
    r.sim->load_state(run_dir / "final");
    return r;
}

int cmd_gen_data(const ConfigFlags& flags, const std::string& out) {
    const auto cfg = flags.resolve();
    const std::uint64_t seed = cfg.seeds.front();
    const auto datasets = fl::build_datasets(cfg, seed);
    data::export_datasets(out, datasets, seed);
    std::printf("wrote %zu style datasets to %s\n", datasets.size(), out.c_str());
    return 0;
}

int cmd_train(const ConfigFlags& flags, bool skip_eval) {
    const auto cfg = flags.resolve();
    std::vector<eval::ResultRow> all;
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path dir = fl::run_directory(cfg, seed);
        std::printf("%s/%s seed %llu -> %s\n", std::string(fl::to_string(cfg.method)).c_str(),
                    std::string(loss::to_string(cfg.variant)).c_str(), static_cast<unsigned long long>(seed),
                    dir.c_str());
        fl::Simulation sim = fl::run_experiment(cfg, seed, dir);
        if (skip_eval) continue;
        const auto rows = evaluate(sim, fl::build_datasets(cfg, seed));
        eval::write_results_csv(dir / "results.csv", rows);
        eval::write_results_csv(fs::path(cfg.output_dir) / "results.csv", rows, true);
        print_rows(rows);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    if (!all.empty()) {
        const auto summary = eval::summarize(all);
        const fs::path dir = fl::run_directory(cfg, cfg.seeds.front()).parent_path();
        eval::write_summary_csv(dir / "summary.csv", summary);
        for (const auto& s : summary)
            std::printf("%s %s %s: %.4f +- %.4f over %zu seed(s)\n", s.method.c_str(), s.setting.c_str(),
                        s.metric.c_str(), s.mean, s.stdev, s.seeds);
    }
    return 0;
}

int cmd_eval(const ConfigFlags& flags, const fs::path& run_dir) {
    Restored r = restore(flags, run_dir);
    const auto rows = evaluate(*r.sim, r.datasets);
    eval::write_results_csv(run_dir / "results.csv", rows);
    print_rows(rows);
    return 0;
}

int cmd_export(const ConfigFlags& flags, const fs::path& run_dir, const fs::path& out, const std::string& which) {
    if (which != "h_c" && which != "h_s") throw fl::ConfigError("--features: expected h_c or h_s, got '" + which + "'");
    Restored r = restore(flags, run_dir);
    eval::export_embeddings(out, *r.sim, which == "h_s" ? eval::Embedding::style : eval::Embedding::content);
    std::printf("embeddings written to %s\n", out.c_str());
    return 0;
}

int cmd_grad_check(std::uint64_t seed, std::size_t instances, double tolerance) {
    std::map<std::string, double> worst;
    std::vector<std::string> order;
    for (std::size_t k = 0; k < instances; ++k)
        for (const auto& c : loss::run_gradcheck_suite(seed + k)) {
            if (!worst.contains(c.name)) order.push_back(c.name);
            worst[c.name] = std::max(worst[c.name], c.result.relative_error);
        }
    int failures = 0;
    for (const auto& name : order) {
        const bool ok = worst[name] < tolerance;
        failures += !ok;
        std::printf("%-24s max rel_err %.3e over %zu instances  %s\n", name.c_str(), worst[name], instances,
                    ok ? "ok" : "FAIL");
    }
    return failures == 0 ? 0 : 1;
}

int cmd_oracle_check(std::uint64_t seed, double tau, double tolerance) {
    int failures = 0;
    for (const auto& c : loss::run_loss_oracles(seed, 4, tau)) {
        const bool ok = c.abs_error < tolerance;
        failures += !ok;
        std::printf("%-20s impl %.15g  oracle %.15g  |diff| %.2e  %s\n", c.name.c_str(), c.implementation, c.oracle,
                    c.abs_error, ok ? "ok" : "FAIL");
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedStyle simulator: federated unsupervised representation learning with style infusion"};
    app.require_subcommand(1);

    ConfigFlags gen_flags, train_flags, eval_flags, export_flags;
    std::string gen_out = "data";
    auto* gen = app.add_subcommand("gen-data", "Render the synthetic style datasets and export them");
    gen_flags.attach(gen);
    gen->add_option("-o,--out", gen_out, "Output directory");

    bool skip_eval = false;
    auto* train = app.add_subcommand("train", "Run federated training for every configured seed, then evaluate");
    train_flags.attach(train);
    train->add_flag("--no-eval", skip_eval, "Skip the linear-probe evaluation");

    std::string eval_dir;
    auto* ev = app.add_subcommand("eval", "Linear-probe evaluation of a finished run");
    eval_flags.attach(ev);
    ev->add_option("-r,--run-dir", eval_dir, "Run directory (holds config.toml and final/)")->required();

    std::string export_dir, export_out = "embeddings", export_which = "h_c";
    auto* ex = app.add_subcommand("export-embeddings", "Dump personal-encoder features of every client sample");
    export_flags.attach(ex);
    ex->add_option("-r,--run-dir", export_dir, "Run directory")->required();
    ex->add_option("-o,--out", export_out, "Output directory");
    ex->add_option("--features", export_which, "h_c (content) or h_s (style)");

    std::uint64_t gc_seed = 7;
    std::size_t gc_instances = 10;
    double gc_tol = 1e-5;
    auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every op and loss");
    gc->add_option("--seed", gc_seed, "First input seed");
    gc->add_option("--instances", gc_instances, "Random instances per check");
    gc->add_option("--tolerance", gc_tol, "Relative error bound");

    std::uint64_t oc_seed = 7;
    double oc_tau = 0.07, oc_tol = 1e-10;
    auto* oc = app.add_subcommand("oracle-check", "Compare the contrastive losses with brute-force double sums");
    oc->add_option("--seed", oc_seed, "Embedding seed");
    oc->add_option("--tau", oc_tau, "Temperature");
    oc->add_option("--tolerance", oc_tol, "Absolute error bound");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_flags, gen_out);
        if (train->parsed()) return cmd_train(train_flags, skip_eval);
        if (ev->parsed()) return cmd_eval(eval_flags, eval_dir);
        if (ex->parsed()) return cmd_export(export_flags, export_dir, export_out, export_which);
        if (gc->parsed()) return cmd_grad_check(gc_seed, gc_instances, gc_tol);
        if (oc->parsed()) return cmd_oracle_check(oc_seed, oc_tau, oc_tol);
    } catch (const fl::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
