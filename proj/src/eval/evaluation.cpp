#include "fedstyle/eval/evaluation.hpp"

#include "fedstyle/nn/checkpoint.hpp"
#include "fedstyle/style/fedstyle.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>
#include <set>

namespace fedstyle::eval {

using ad::Tensor;
using ad::Var;
namespace fs = std::filesystem;

std::string setting_label(const fl::ExperimentConfig& cfg) {
    if (cfg.iid) return "Ho";
    char buf[32];
    std::snprintf(buf, sizeof buf, "He@%g", cfg.beta);
    return buf;
}

std::string method_label(const fl::ExperimentConfig& cfg) {
    if (cfg.method == fl::Method::fedstyle && !cfg.stylized_feature) return "fedstyle-content-only";
    return std::string(fl::to_string(cfg.method));
}

ProbeSettings probe_settings(const fl::ExperimentConfig& cfg, std::uint64_t seed,
                             std::initializer_list<std::uint64_t> stream) {
    return {cfg.probe_epochs, cfg.probe_lr, derive_seed(seed, stream)};
}

namespace {

std::vector<int> labels_of(std::span<const data::ImageSample> samples, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(samples[i].content_label);
    return out;
}

Tensor images_of(std::span<const data::ImageSample> samples, std::span<const std::size_t> idx) {
    std::vector<const data::Image*> ptrs;
    ptrs.reserve(idx.size());
    for (std::size_t i : idx) ptrs.push_back(&samples[i].image);
    return data::to_batch(std::span<const data::Image* const>(ptrs));
}

int class_count(const fl::Simulation& sim) {
    int k = 0;
    for (const auto& c : sim.clients())
        for (const auto& s : c.shard.samples) k = std::max(k, s.content_label + 1);
    return std::max(k, 2);
}

ResultRow row(const fl::Simulation& sim, int style, std::string client, double acc) {
    const auto& cfg = sim.config();
    return {method_label(cfg), std::string(loss::to_string(cfg.variant)), style, std::move(client),
            setting_label(cfg), acc, sim.seed()};
}

}  // namespace

double probe_accuracy(const Tensor& train, std::span<const int> train_labels, const Tensor& test,
                      std::span<const int> test_labels, int num_classes, const ProbeSettings& settings,
                      StylizedInputs* stylized) {
    if (!stylized) {
        const LinearProbe p = train_linear_probe(train, train_labels, num_classes, settings);
        return accuracy(argmax_rows(probe_logits(p, test)), test_labels);
    }
    StylizedInputs& st = *stylized;
    const bool train_g = st.train_generator;
    const LinearProbe p = train_probe_graph(
        [&](ad::Tape& tape) {
            return style::personalized_feature(tape, tape.constant(train), tape.constant(st.style_train), st.generator,
                                               train_g);
        },
        train_labels, num_classes, settings, [&] {
            if (train_g) ad::sgd_step(st.generator, settings.lr);
        });
    ad::Tape tape;
    const Tensor f =
        style::personalized_feature(tape, tape.constant(test), tape.constant(st.style_test), st.generator, false)
            .value();
    return accuracy(argmax_rows(probe_logits(p, f)), test_labels);
}

std::vector<ResultRow> eval_generalization(const fl::Simulation& sim, std::span<const data::StyleDataset> datasets) {
    const auto& cfg = sim.config();
    std::vector<ResultRow> rows;
    for (const auto& ds : datasets) {
        Rng rng = make_rng(sim.seed(), {stream_tag("gen-split"), static_cast<std::uint64_t>(ds.style_id)});
        const data::Split split = data::split_indices(ds.samples.size(), cfg.test_fraction, rng);
        const int k = std::max(data::num_classes(ds), 2);
        const Tensor tr = fl::encode(sim.global(), images_of(ds.samples, split.train));
        const Tensor te = fl::encode(sim.global(), images_of(ds.samples, split.test));
        const auto y_tr = labels_of(ds.samples, split.train);
        const auto y_te = labels_of(ds.samples, split.test);
        const ProbeSettings ps =
            probe_settings(cfg, sim.seed(), {stream_tag("gen-probe"), static_cast<std::uint64_t>(ds.style_id)});
        rows.push_back(row(sim, ds.style_id, "global", probe_accuracy(tr, y_tr, te, y_te, k, ps)));
    }
    return rows;
}

double personalization_accuracy(const fl::Simulation& sim, const fl::ClientState& c) {
    const auto& cfg = sim.config();
    const nn::ContentModel personal = fl::personal_model(cfg.method, c, cfg.apfl_alpha);
    const Tensor x_tr = images_of(c.shard.samples, c.shard.train);
    const Tensor x_te = images_of(c.shard.samples, c.shard.test);
    const auto y_tr = labels_of(c.shard.samples, c.shard.train);
    const auto y_te = labels_of(c.shard.samples, c.shard.test);
    const Tensor h_tr = fl::encode(personal, x_tr);
    const Tensor h_te = fl::encode(personal, x_te);
    const int k = class_count(sim);
    // A single-class training split admits no probe; predict that class.
    if (std::set<int>(y_tr.begin(), y_tr.end()).size() < 2) {
        const std::vector<int> pred(y_te.size(), y_tr.empty() ? 0 : y_tr.front());
        return accuracy(pred, y_te);
    }
    const ProbeSettings ps = probe_settings(cfg, sim.seed(), {stream_tag("personal-probe"), static_cast<std::uint64_t>(c.id())});
    if (cfg.method == fl::Method::fedstyle && cfg.stylized_feature && c.style) {
        StylizedInputs st{style::style_features(*c.style, x_tr), style::style_features(*c.style, x_te),
                          c.style->generator, true};
        return probe_accuracy(h_tr, y_tr, h_te, y_te, k, ps, &st);
    }
    return probe_accuracy(h_tr, y_tr, h_te, y_te, k, ps);
}

std::vector<ResultRow> eval_personalization(const fl::Simulation& sim) {
    std::vector<ResultRow> rows;
    for (const auto& c : sim.clients())
        rows.push_back(row(sim, c.shard.style_id, std::to_string(c.id()), personalization_accuracy(sim, c)));
    return rows;
}

void write_results_csv(const fs::path& path, std::span<const ResultRow> rows, bool append) {
    const bool header = !(append && fs::exists(path));
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    if (header) out << "method,variant,style,client,setting,accuracy,seed\n";
    for (const auto& r : rows) {
        char acc[32];
        std::snprintf(acc, sizeof acc, "%.6f", r.accuracy);
        out << r.method << ',' << r.variant << ',' << r.style << ',' << r.client << ',' << r.setting << ',' << acc
            << ',' << r.seed << '\n';
    }
}

std::vector<SummaryRow> summarize(std::span<const ResultRow> rows) {
    // key -> seed -> (sum, count)
    using Key = std::tuple<std::string, std::string, std::string, std::string>;
    std::map<Key, std::map<std::uint64_t, std::pair<double, std::size_t>>> groups;
    for (const auto& r : rows) {
        auto& cell = groups[{r.method, r.variant, r.setting,
                             r.client == "global" ? "generalization" : "personalization"}][r.seed];
        cell.first += r.accuracy;
        ++cell.second;
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, seeds] : groups) {
        std::vector<double> means;
        for (const auto& [seed, cell] : seeds) means.push_back(cell.first / static_cast<double>(cell.second));
        const double n = static_cast<double>(means.size());
        double mean = 0.0;
        for (double m : means) mean += m;
        mean /= n;
        double ss = 0.0;
        for (double m : means) ss += (m - mean) * (m - mean);
        const auto& [method, variant, setting, metric] = key;
        out.push_back({method, variant, setting, metric, mean, means.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0,
                       means.size()});
    }
    return out;
}

void write_summary_csv(const fs::path& path, std::span<const SummaryRow> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "method,variant,setting,metric,mean,stdev,seeds\n";
    for (const auto& r : rows) {
        char nums[64];
        std::snprintf(nums, sizeof nums, "%.6f,%.6f", r.mean, r.stdev);
        out << r.method << ',' << r.variant << ',' << r.setting << ',' << r.metric << ',' << nums << ',' << r.seeds
            << '\n';
    }
}

void export_embeddings(const fs::path& dir, const fl::Simulation& sim, Embedding which) {
    fs::create_directories(dir);
    std::vector<double> blob;
    nlohmann::json rows = nlohmann::json::array();
    std::size_t dim = 0;
    for (const auto& c : sim.clients()) {
        const nn::ContentModel personal = fl::personal_model(sim.config().method, c, sim.config().apfl_alpha);
        for (const auto* part : {&c.shard.train, &c.shard.test}) {
            if (part->empty()) continue;
            const Tensor x = images_of(c.shard.samples, *part);
            if (which == Embedding::style && !c.style)
                throw std::invalid_argument("export_embeddings: style features exist only for FedStyle runs");
            const Tensor h = which == Embedding::style ? style::style_features(*c.style, x) : fl::encode(personal, x);
            dim = h.shape()[1];
            blob.insert(blob.end(), h.values().begin(), h.values().end());
            for (std::size_t i : *part)
                rows.push_back({{"client", c.id()},
                                {"style", c.shard.style_id},
                                {"label", c.shard.samples[i].content_label},
                                {"split", part == &c.shard.train ? "train" : "test"}});
        }
    }
    nn::write_f64_le(dir / "embeddings.bin", blob);
    nlohmann::json manifest = {{"format", "fedstyle-embeddings"},
                               {"version", 1},
                               {"method", method_label(sim.config())},
                               {"features", which == Embedding::style ? "h_s" : "h_c"},
                               {"seed", sim.seed()},
                               {"shape", {rows.size(), dim}},
                               {"rows", rows}};
    std::ofstream(dir / "embeddings.json") << manifest.dump(2) << '\n';
}

}  // namespace fedstyle::eval
