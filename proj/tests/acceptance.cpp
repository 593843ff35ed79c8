// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: acceptance <path-to-fedstyle_cli> [--known-failure N]... [criterion numbers...]
// Exit status is 0 when exactly the declared known failures fail.

#include "fedstyle/eval/evaluation.hpp"
#include "fedstyle/loss/gradcheck_suite.hpp"
#include "fedstyle/loss/oracles.hpp"
#include "fedstyle/style/fedstyle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace fedstyle;
namespace fs = std::filesystem;
using fl::ExperimentConfig;
using fl::Method;

namespace {

constexpr double kGradTol = 1e-5;
constexpr double kOracleTol = 1e-10;
constexpr double kAggregateTol = 1e-12;
constexpr double kStyleProbeFloor = 0.90;
const std::vector<std::uint64_t> kTrendSeeds{2011, 2015, 2021};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh(const fs::path& p) {
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const fs::path kWork = "acceptance_runs";
std::string g_cli;

// --- shared configurations ---------------------------------------------------

ExperimentConfig small_config(Method m) {
    ExperimentConfig c;
    c.method = m;
    c.num_classes = 3;
    c.num_styles = 2;
    c.per_class_count = 30;
    c.clients_per_style = 2;
    c.samples_per_client = 40;
    c.rounds = 3;
    c.local_epochs = 1;
    c.style_epochs = 1;
    c.encoder_hidden = {32};
    c.feature_dim = 16;
    c.projector_hidden = 16;
    c.projection_dim = 8;
    c.generator_hidden = 16;
    c.predictor_hidden = 4;
    c.batch_size = 16;
    c.tau = 0.5;
    c.probe_epochs = 30;
    c.threads = 1;
    return c;
}

fl::Simulation make_sim(const ExperimentConfig& c, std::uint64_t seed) {
    const auto ds = fl::build_datasets(c, seed);
    return fl::Simulation(c, fl::build_shards(c, ds, seed), seed);
}

// The desk-scale trend setup: 3 styles, one client each, 5 classes, 30 rounds, SimCLR.
ExperimentConfig trend_config(Method m, double lambda) {
    ExperimentConfig c;
    c.method = m;
    c.variant = loss::Variant::simclr;
    c.num_styles = 3;
    c.clients_per_style = 1;
    c.num_classes = 5;
    c.rounds = 30;
    c.lambda = lambda;
    c.threads = 0;
    return c;
}

double distance_sq(const nn::ContentModel& a, const nn::ContentModel& b) {
    const auto x = nn::flatten(a), y = nn::flatten(b);
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
    return d;
}

// --- criteria ---------------------------------------------------------------

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_name;
    std::size_t checks = 0, bad = 0;
    for (std::uint64_t s = 0; s < 10; ++s)
        for (const auto& c : loss::run_gradcheck_suite(1000 + s)) {
            ++checks;
            if (!(c.result.relative_error < kGradTol)) ++bad;
            if (c.result.relative_error > worst) {
                worst = c.result.relative_error;
                worst_name = c.name;
            }
        }
    const double t = seconds_since(t0);
    return {bad == 0 && t < 60.0,
            fmt("%zu checks x 10 instances, max rel err %.2e (%s), %zu above %.0e, %.1f s", checks / 10, worst,
                worst_name.c_str(), bad, kGradTol, t)};
}

Outcome loss_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool b1_zero = true;
    std::size_t n = 0;
    for (std::uint64_t s = 0; s < 5; ++s)
        for (double tau : {0.07, 0.5, 1.0})
            for (const auto& c : loss::run_loss_oracles(2000 + s, 4, tau)) {
                ++n;
                worst = std::max(worst, c.abs_error);
                if (c.name.ends_with("B=1") && (c.implementation != 0.0 || c.oracle != 0.0)) b1_zero = false;
            }
    const double t = seconds_since(t0);
    return {worst < kOracleTol && b1_zero && t < 60.0,
            fmt("%zu comparisons over B=1..4, max abs err %.2e, B=1 exactly zero: %s, %.2f s", n, worst,
                b1_zero ? "yes" : "no", t)};
}

Outcome degenerate_equivalences() {
    const auto t0 = std::chrono::steady_clock::now();
    // (a) one client, alpha = 1: the federated trajectory is plain sequential training.
    auto c = small_config(Method::fedavg);
    c.rounds = 4;
    auto shards = fl::build_shards(c, fl::build_datasets(c, 31), 31);
    shards.resize(1);
    fl::Simulation one(c, shards, 31);
    nn::ContentModel seq = one.global();
    const auto settings = fl::train_settings(c);
    bool trajectory = true;
    for (std::size_t r = 1; r <= c.rounds; ++r) {
        one.run_round(r);
        Rng rng = make_rng(31, {stream_tag("local"), r, 0});
        fl::LossSum ls;
        fl::ssl_epochs(seq, shards[0], c.local_epochs, settings, rng, {}, nullptr, ls);
        trajectory = trajectory && one.global() == seq;
    }
    // (b) FedStyle with lambda = 0 and no style pretraining is FedAvg.
    bool reduces = true;
    for (auto v : {loss::Variant::simclr, loss::Variant::simsiam}) {
        auto fs_cfg = small_config(Method::fedstyle);
        fs_cfg.variant = v;
        fs_cfg.lambda = 0.0;
        fs_cfg.style_epochs = 0;
        auto fa_cfg = fs_cfg;
        fa_cfg.method = Method::fedavg;
        auto a = make_sim(fs_cfg, 32), b = make_sim(fa_cfg, 32);
        a.run();
        b.run();
        reduces = reduces && a.global() == b.global();
        for (std::size_t i = 0; i < a.clients().size(); ++i) reduces = reduces && a.clients()[i].model == b.clients()[i].model;
    }
    const double t = seconds_since(t0);
    return {trajectory && reduces && t < 300.0,
            fmt("(a) bitwise per round: %s; (b) bitwise for simclr and simsiam: %s; %.1f s", trajectory ? "yes" : "no",
                reduces ? "yes" : "no", t)};
}

Outcome aggregation_properties() {
    auto c = small_config(Method::fedavg);
    auto sim = make_sim(c, 41);
    const auto templ = sim.global();
    auto filled = [&](double v) { return nn::unflatten(std::vector<double>(nn::flatten(templ).size(), v), templ); };
    // Oracle: weights 10, 20, 30 on constant models 1, 4, -2 -> (10 + 80 - 60) / 60 = 0.5.
    const auto m1 = filled(1.0), m2 = filled(4.0), m3 = filled(-2.0);
    std::vector<fl::Contribution> up{{0, &m1, 10}, {1, &m2, 20}, {2, &m3, 30}};
    double worst = 0.0;
    for (double v : nn::flatten(fl::aggregate(up))) worst = std::max(worst, std::abs(v - 0.5));

    // Permutation invariance on trained, distinct models.
    sim.run_round(1);
    std::vector<fl::Contribution> real;
    for (const auto& cl : sim.clients())
        real.push_back({cl.id(), &cl.model, cl.num_train() + 3 * static_cast<std::size_t>(cl.id())});
    const auto ref = fl::aggregate(real);
    bool perm = true;
    std::sort(real.begin(), real.end(), [](auto& a, auto& b) { return a.client_id < b.client_id; });
    do {
        perm = perm && fl::aggregate(real) == ref;
    } while (std::next_permutation(real.begin(), real.end(),
                                   [](auto& a, auto& b) { return a.client_id < b.client_id; }));

    // Shuffled execution order: the same round on 1 thread and on 4 threads.
    bool threads = true;
    for (Method m : {Method::fedavg, Method::fedstyle, Method::ditto}) {
        auto a_cfg = small_config(m), b_cfg = small_config(m);
        b_cfg.threads = 4;
        auto a = make_sim(a_cfg, 42), b = make_sim(b_cfg, 42);
        a.run();
        b.run();
        threads = threads && a.global() == b.global();
    }
    return {worst <= kAggregateTol && perm && threads,
            fmt("oracle max err %.1e; all 24 upload orders bitwise equal: %s; 1 vs 4 threads bitwise equal: %s", worst,
                perm ? "yes" : "no", threads ? "yes" : "no")};
}

Outcome partition_properties() {
    data::SyntheticSpec spec;
    spec.num_classes = 5;
    spec.num_styles = 2;
    spec.per_class_count = 60;
    spec.seed = 51;
    const auto ds = data::generate_styled_dataset(spec);

    bool totals = true, balance = true;
    for (std::size_t per : {50u, 73u, 150u}) {
        data::PartitionSpec p;
        p.clients_per_style = 3;
        p.samples_per_client = per;
        p.seed = 52;
        for (const auto& s : data::partition_all(ds, p)) {
            totals = totals && s.samples.size() == per && s.train.size() + s.test.size() == per;
            if (per % 5 == 0) {
                std::map<int, std::size_t> counts;
                for (const auto& x : s.samples) ++counts[x.content_label];
                for (const auto& [k, n] : counts) balance = balance && n == per / 5 && counts.size() == 5;
            }
        }
        for (double beta : {0.1, 0.5, 2.0}) {
            p.beta = beta;
            for (const auto& s : data::partition_all(ds, p)) totals = totals && s.samples.size() == per;
        }
    }

    // Concentration: mean over 100 partitions of sum_k p_k^2 of each client's class histogram.
    auto concentration = [&](double beta) {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::uint64_t d = 0; d < 100; ++d) {
            data::PartitionSpec p;
            p.clients_per_style = 1;
            p.samples_per_client = 100;
            p.beta = beta;
            p.seed = 600 + d;
            for (const auto& s : data::partition_all(ds, p)) {
                std::map<int, double> counts;
                for (const auto& x : s.samples) counts[x.content_label] += 1.0;
                double sq = 0.0;
                for (const auto& [k, v] : counts) sq += (v / 100.0) * (v / 100.0);
                acc += sq;
                ++n;
            }
        }
        return acc / static_cast<double>(n);
    };
    const double c02 = concentration(0.2), c08 = concentration(0.8);
    return {totals && balance && c02 > c08,
            fmt("exact totals: %s; IID balance: %s; mean sum p^2 beta 0.2 = %.3f > beta 0.8 = %.3f (expected 0.600 and "
                "0.360)",
                totals ? "yes" : "no", balance ? "yes" : "no", c02, c08)};
}

Outcome parameter_flow() {
    std::vector<std::string> failures;
    auto require = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    for (Method m : {Method::fedper, Method::fedrep}) {
        auto sim = make_sim(small_config(m), 61);
        auto& c = sim.clients()[0];
        const auto head = c.model.projector;
        auto g = sim.global();
        for (auto& e : g.projector.entries())
            for (double& v : e.tensor.values()) v += 1.0;
        fl::local_update(m, g, c);
        require(c.model.projector == head, std::string(fl::to_string(m)) + " projector overwritten by broadcast");
        require(c.model.encoder == g.encoder, std::string(fl::to_string(m)) + " encoder not received");
        sim.run();
        std::vector<fl::Contribution> up;
        for (const auto& cl : sim.clients()) up.push_back({cl.id(), &cl.model, cl.num_train()});
        const auto agg = fl::aggregate(up);
        require(sim.global().encoder == agg.encoder, std::string(fl::to_string(m)) + " encoder aggregate");
        require(sim.clients()[0].model.projector != sim.clients()[1].model.projector,
                std::string(fl::to_string(m)) + " projectors not local");
    }
    for (Method m : {Method::apfl, Method::ditto}) {
        auto sim = make_sim(small_config(m), 62);
        auto& c = sim.clients()[0];
        const auto local = c.model;
        auto g = sim.global();
        for (auto& e : g.encoder.entries())
            for (double& v : e.tensor.values()) v += 1.0;
        fl::local_update(m, g, c);
        require(c.global_copy && *c.global_copy == g, std::string(fl::to_string(m)) + " global copy not snapshotted");
        require(c.model == local, std::string(fl::to_string(m)) + " personal model overwritten");
    }
    // FedProx anchors to the round-start global model: with a huge mu the client barely leaves it.
    {
        auto cfg = small_config(Method::fedprox);
        auto sim = make_sim(cfg, 63);
        const auto& c0 = sim.clients()[0];
        auto s = fl::train_settings(cfg);
        auto drift = [&](double mu) {
            auto c = c0;
            s.mu = mu;
            Rng rng = make_rng(64, {});
            fl::local_training(Method::fedprox, c, 3, s, rng);
            return distance_sq(c.model, c0.model);
        };
        const double free = drift(0.0), held = drift(1.0);
        require(held < free, fmt("fedprox drift %.4g (mu 1) not below %.4g (mu 0)", held, free));
    }
    // FedRep phases: the head phase leaves the encoder bitwise fixed, the body phase the head.
    {
        auto cfg = small_config(Method::fedrep);
        auto sim = make_sim(cfg, 65);
        auto c = sim.clients()[0];
        const auto s = fl::train_settings(cfg);
        Rng rng = make_rng(66, {});
        fl::LossSum ls;
        const auto before = c.model;
        fl::ssl_epochs(c.model, c.shard, 1, s, rng, {false, true}, nullptr, ls);
        require(c.model.encoder == before.encoder && c.model.projector != before.projector, "fedrep head phase");
        const auto mid = c.model;
        fl::ssl_epochs(c.model, c.shard, 1, s, rng, {true, false}, nullptr, ls);
        require(c.model.projector == mid.projector && c.model.encoder != mid.encoder, "fedrep body phase");
    }
    std::string detail = failures.empty() ? "FedPer/FedRep heads local, APFL/Ditto snapshot global copy, FedProx "
                                            "shrinks drift, FedRep phases freeze bitwise"
                                          : "";
    for (const auto& f : failures) detail += (detail.empty() ? "" : "; ") + f;
    return {failures.empty(), detail};
}

Outcome style_extraction() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string per_seed;
    std::size_t passed = 0;
    for (std::uint64_t seed : kTrendSeeds) {
        ExperimentConfig c;
        c.method = Method::fedstyle;
        c.num_styles = 2;
        c.clients_per_style = 1;
        c.num_classes = 5;
        c.per_class_count = 100;
        c.samples_per_client = 500;
        c.style_epochs = 10;
        c.feature_dim = 64;
        c.threads = 0;
        auto sim = make_sim(c, seed);

        std::vector<const data::Image*> imgs;
        std::vector<int> labels;
        ad::Tensor h;
        std::vector<double> rows;
        for (std::size_t k = 0; k < sim.clients().size(); ++k) {
            const auto& cl = sim.clients()[k];
            std::vector<std::size_t> all(cl.shard.samples.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            const auto feats = style::style_features(*cl.style, fl::raw_batch(cl.shard, all));
            rows.insert(rows.end(), feats.values().begin(), feats.values().end());
            labels.insert(labels.end(), all.size(), static_cast<int>(k));
        }
        const std::size_t d = c.feature_dim, n = labels.size();
        Rng rng = make_rng(seed, {stream_tag("style-probe-split")});
        const auto split = data::split_indices(n, 0.3, rng);
        auto take = [&](const std::vector<std::size_t>& idx, ad::Tensor& x, std::vector<int>& y) {
            x = ad::Tensor({idx.size(), d});
            y.clear();
            for (std::size_t r = 0; r < idx.size(); ++r) {
                std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d,
                            x.values().begin() + static_cast<std::ptrdiff_t>(r * d));
                y.push_back(labels[idx[r]]);
            }
        };
        ad::Tensor xtr, xte;
        std::vector<int> ytr, yte;
        take(split.train, xtr, ytr);
        take(split.test, xte, yte);
        const double acc = eval::probe_accuracy(xtr, ytr, xte, yte, 2, {100, 0.1, seed});
        passed += acc > kStyleProbeFloor;
        per_seed += fmt("%s%llu: %.3f", per_seed.empty() ? "" : ", ", static_cast<unsigned long long>(seed), acc);
    }
    const double t = seconds_since(t0);
    return {passed == kTrendSeeds.size() && t < 600.0,
            fmt("h_s probe accuracy by seed (%s), floor %.2f, %zu/3 seeds, %.0f s", per_seed.c_str(),
                kStyleProbeFloor, passed, t)};
}

struct TrendRun {
    double personal = 0.0;     // mean over clients
    double gen_var = 0.0;      // mean over clients (FedStyle)
    double unit_var = 0.0;     // same, on L2-normalized generator outputs; diagnostic only
};

// Total variance across samples of the L2-normalized generator outputs.
double unit_generator_variance(const fl::ClientState& c) {
    const ad::Tensor x = fl::raw_batch(c.shard, c.shard.train);
    nn::ParamSet gen = c.style->generator;
    ad::Tape tape;
    const ad::Tensor g = ad::l2_normalize(nn::generator_forward(tape, gen, tape.constant(fl::encode(c.model, x)),
                                                                tape.constant(style::style_features(*c.style, x)),
                                                                false))
                             .value();
    const std::size_t n = g.shape()[0], d = g.shape()[1];
    double total = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += g.at(i, k) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) var += (g.at(i, k) - mean) * (g.at(i, k) - mean);
        total += var / static_cast<double>(n);
    }
    return total;
}

std::map<std::pair<std::string, std::uint64_t>, TrendRun> g_trend;

TrendRun trend_run(Method m, double lambda, std::uint64_t seed, const std::string& key) {
    const auto k = std::make_pair(key, seed);
    if (auto it = g_trend.find(k); it != g_trend.end()) return it->second;
    const auto cfg = trend_config(m, lambda);
    auto sim = make_sim(cfg, seed);
    sim.run();
    const auto rows = eval::eval_personalization(sim);
    TrendRun r;
    for (const auto& row : rows) r.personal += row.accuracy / static_cast<double>(rows.size());
    if (m == Method::fedstyle)
        for (const auto& c : sim.clients()) {
            r.gen_var += style::generator_output_variance(c) / static_cast<double>(sim.clients().size());
            r.unit_var += unit_generator_variance(c) / static_cast<double>(sim.clients().size());
        }
    fs::create_directories(kWork);
    eval::write_results_csv(kWork / "trend_results.csv", rows, true);
    g_trend[k] = r;
    return r;
}

Outcome fedstyle_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    fs::remove(kWork / "trend_results.csv");
    double fa = 0.0, fsm = 0.0;
    std::string per_seed;
    for (std::uint64_t seed : kTrendSeeds) {
        const double a = trend_run(Method::fedavg, 0.5, seed, "fedavg").personal;
        const double b = trend_run(Method::fedstyle, 0.5, seed, "fedstyle-0.5").personal;
        fa += a / 3.0;
        fsm += b / 3.0;
        per_seed += fmt("%s%llu fedstyle %.4f fedavg %.4f", per_seed.empty() ? "" : "; ",
                        static_cast<unsigned long long>(seed), b, a);
    }
    const double t = seconds_since(t0);
    return {fsm >= fa && t < 1800.0,
            fmt("mean personalization fedstyle %.4f vs fedavg %.4f (%s), %.0f s", fsm, fa, per_seed.c_str(), t)};
}

Outcome lambda_collapse() {
    const auto t0 = std::chrono::steady_clock::now();
    double acc_lo = 0.0, acc_hi = 0.0, var_lo = 0.0, var_hi = 0.0, unit_lo = 0.0, unit_hi = 0.0;
    std::string per_seed;
    for (std::uint64_t seed : kTrendSeeds) {
        const auto lo = trend_run(Method::fedstyle, 0.5, seed, "fedstyle-0.5");
        const auto hi = trend_run(Method::fedstyle, 10.0, seed, "fedstyle-10");
        acc_lo += lo.personal / 3.0;
        acc_hi += hi.personal / 3.0;
        var_lo += lo.gen_var / 3.0;
        var_hi += hi.gen_var / 3.0;
        unit_lo += lo.unit_var / 3.0;
        unit_hi += hi.unit_var / 3.0;
        per_seed += fmt("%s%llu acc %.4f/%.4f var %.3g/%.3g", per_seed.empty() ? "" : "; ",
                        static_cast<unsigned long long>(seed), hi.personal, lo.personal, hi.gen_var, lo.gen_var);
    }
    const double t = seconds_since(t0);
    return {acc_hi < acc_lo && var_hi < var_lo,
            fmt("lambda 10 vs 0.5: personalization %.4f vs %.4f, generator variance %.4g vs %.4g (per seed %s); "
                "unit-norm generator variance %.2e vs %.2e (diagnostic), %.0f s",
                acc_hi, acc_lo, var_hi, var_lo, per_seed.c_str(), unit_hi, unit_lo, t)};
}

int run_cli(const std::string& args, const fs::path& log, const fs::path& cwd = {}) {
    std::string cmd = "\"" + g_cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    if (!cwd.empty()) cmd = "cd \"" + cwd.string() + "\" && " + cmd;
    return std::system(cmd.c_str());
}

std::string small_cli_flags(int rounds = 2) {
    return "--num-styles 2 --clients-per-style 1 --num-classes 3 --per-class-count 30 --samples-per-client 45 "
           "--local-epochs 1 --encoder-hidden [64] --batch-size 32 --probe-epochs 30 --threads 1 --rounds " +
           std::to_string(rounds);
}

Outcome ablation_hooks() {
    if (g_cli.empty()) return {false, "no CLI path given"};
    const fs::path root = fresh(kWork / "ablation");
    std::vector<std::string> problems;
    const std::string header = "method,variant,style,client,setting,accuracy,seed";
    auto check_csv = [&](const fs::path& csv, const std::string& method, std::size_t rows) {
        std::ifstream in(csv);
        std::string line;
        std::getline(in, line);
        if (line != header) problems.push_back(csv.string() + ": bad header");
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.rfind(method + ",", 0) != 0) problems.push_back(csv.string() + ": unexpected method in " + line);
        }
        if (n != rows) problems.push_back(fmt("%s: %zu rows, expected %zu", csv.c_str(), n, rows));
    };
    // E_s sweep, each from its own config file.
    for (int es : {0, 10, 100}) {
        const fs::path dir = root / ("es_" + std::to_string(es));
        fs::create_directories(dir);
        std::ofstream(dir / "config.toml") << "# E_s sweep\nmethod = \"fedstyle\"\nstyle_epochs = " << es
                                            << "\noutput_dir = \"" << (dir / "out").string() << "\"\n";
        if (run_cli("train -c \"" + (dir / "config.toml").string() + "\" " + small_cli_flags(), dir / "log.txt") != 0) {
            problems.push_back(fmt("E_s=%d: train failed", es));
            continue;
        }
        const fs::path run = dir / "out" / "fedstyle-simclr" / "seed_2011";
        check_csv(run / "results.csv", "fedstyle", 4);
        const auto pre = nlohmann::json::parse(slurp(run / "style_pretrain.json"));
        for (const auto& [id, losses] : pre.items())
            if (losses.size() != static_cast<std::size_t>(es)) problems.push_back(fmt("E_s=%d: pretrain epochs", es));
    }
    // Stylized feature on and off.
    for (bool on : {true, false}) {
        const fs::path dir = root / (on ? "stylized_on" : "stylized_off");
        fs::create_directories(dir);
        std::ofstream(dir / "config.toml") << "method = \"fedstyle\"\nstylized_feature = " << (on ? "true" : "false")
                                            << "\noutput_dir = \"" << (dir / "out").string() << "\"\n";
        if (run_cli("train -c \"" + (dir / "config.toml").string() + "\" " + small_cli_flags(), dir / "log.txt") != 0) {
            problems.push_back(std::string("stylized ") + (on ? "on" : "off") + ": train failed");
            continue;
        }
        check_csv(dir / "out" / "fedstyle-simclr" / "seed_2011" / "results.csv",
                  on ? "fedstyle" : "fedstyle-content-only", 4);
    }
    std::string detail = problems.empty() ? "E_s in {0,10,100} and stylized on/off ran from config files and wrote "
                                            "results.csv with the expected schema and rows"
                                          : "";
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
    return {problems.empty(), detail};
}

// Every regular file under `dir`, relative path -> bytes; wall-clock timings are excluded.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "timings.jsonl")
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

Outcome determinism() {
    if (g_cli.empty()) return {false, "no CLI path given"};
    std::vector<std::string> diffs;
    std::size_t files = 0;
    std::map<std::string, std::string> trees[2];
    // Both repetitions run the same relative command lines from their own directory.
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path root = fs::absolute(fresh(kWork / ("determinism_" + std::to_string(rep))));
        const std::string flags = small_cli_flags(3) + " --checkpoint-every 1 --output-dir runs";
        const std::string run = "runs/fedstyle-simclr/seed_2011";
        const std::vector<std::pair<std::string, std::string>> steps{
            {"gen-data", "gen-data " + flags + " -o data"},
            {"train", "train --method fedstyle " + flags},
            {"eval", "eval -r " + run},
            {"export-embeddings", "export-embeddings -r " + run + " -o emb"},
            {"grad-check", "grad-check --instances 2"},
            {"oracle-check", "oracle-check"}};
        for (const auto& [name, args] : steps)
            if (run_cli(args, name + ".log", root) != 0) diffs.push_back(name + " exited nonzero");
        trees[rep] = tree(root);
    }
    for (const auto& [path, bytes] : trees[0]) {
        ++files;
        auto it = trees[1].find(path);
        if (it == trees[1].end()) diffs.push_back(path + " missing in second run");
        else if (it->second != bytes) diffs.push_back(path + " differs");
    }
    if (trees[1].size() != trees[0].size()) diffs.push_back("file sets differ");
    bool has_ckpt = false;
    for (const auto& [path, bytes] : trees[0]) has_ckpt = has_ckpt || path.find("checkpoints/round_0001") != std::string::npos;
    if (!has_ckpt) diffs.push_back("no per-round checkpoints written");
    std::string detail = fmt("%zu files compared byte for byte across two runs of gen-data, train, eval, "
                             "export-embeddings, grad-check, oracle-check",
                             files);
    for (const auto& d : diffs) detail += "; " + d;
    return {diffs.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, known;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--known-failure" && i + 1 < argc) known.insert(std::stoi(argv[++i]));
        else if (!a.empty() && std::all_of(a.begin(), a.end(), ::isdigit)) only.insert(std::stoi(a));
        else g_cli = fs::absolute(a).string();
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"loss oracle equivalence", loss_oracles},
        {"protocol degenerate equivalences", degenerate_equivalences},
        {"aggregation properties", aggregation_properties},
        {"partition properties", partition_properties},
        {"per-method parameter flow", parameter_flow},
        {"style extraction efficacy", style_extraction},
        {"fedstyle personalization trend", fedstyle_trend},
        {"lambda collapse trend", lambda_collapse},
        {"ablation hooks", ablation_hooks},
        {"determinism", determinism},
    };
    std::vector<int> passed, failed;
    fs::create_directories(kWork);
    std::FILE* report = std::fopen((kWork / "report.txt").c_str(), "w");
    auto emit = [&](const std::string& line) {
        std::fputs(line.c_str(), stdout);
        std::fflush(stdout);
        if (report) {
            std::fputs(line.c_str(), report);
            std::fflush(report);
        }
    };
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(n)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        (o.pass ? passed : failed).push_back(n);
        emit(fmt("criterion %2d %-34s %s  ", n, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL") + o.detail +
             "\n");
    }
    bool as_declared = true;
    std::string unexpected;
    for (int n : failed)
        if (!known.count(n)) {
            as_declared = false;
            unexpected += " " + std::to_string(n);
        }
    for (int n : passed)
        if (known.count(n)) {
            as_declared = false;
            unexpected += " " + std::to_string(n) + "(passed)";
        }
    std::string summary = fmt("summary: %zu passed, %zu failed;", passed.size(), failed.size());
    for (int n : failed) summary += " " + std::to_string(n);
    summary += as_declared ? " (all failures are declared known failures)\n" : " unexpected:" + unexpected + "\n";
    emit(summary);
    if (report) std::fclose(report);
    return as_declared ? 0 : 1;
}
