#include "fedstyle/fl/engine.hpp"

#include "fedstyle/nn/checkpoint.hpp"
#include "fedstyle/style/fedstyle.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

namespace fedstyle::fl {

using ad::Tensor;
using ad::Var;
using json = nlohmann::json;
namespace fs = std::filesystem;

std::vector<int> sample_clients(std::span<const int> client_ids, double ratio, Rng& rng) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("sample_clients: ratio must lie in (0, 1]");
    // The epsilon keeps products such as 0.29 * 100 from flooring one short.
    const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(client_ids.size()) + 1e-9));
    std::vector<int> ids(client_ids.begin(), client_ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(std::min(k, ids.size()));
    std::sort(ids.begin(), ids.end());
    return ids;
}

nn::ContentModel aggregate(std::span<const Contribution> uploads) {
    if (uploads.empty()) throw std::invalid_argument("aggregate: no uploads");
    std::vector<Contribution> sorted(uploads.begin(), uploads.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    double total = 0.0;
    for (const auto& u : sorted) {
        if (!u.model) throw std::invalid_argument("aggregate: null model");
        total += static_cast<double>(u.samples);
    }
    if (!(total > 0.0)) throw std::invalid_argument("aggregate: uploads hold no samples");

    std::vector<double> acc;
    for (const auto& u : sorted) {
        const std::vector<double> v = nn::flatten(*u.model);
        const double w = static_cast<double>(u.samples) / total;
        if (acc.empty()) {
            acc.resize(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) acc[i] = w * v[i];
        } else {
            if (v.size() != acc.size()) throw std::invalid_argument("aggregate: uploaded models differ in layout");
            for (std::size_t i = 0; i < v.size(); ++i) acc[i] += w * v[i];
        }
    }
    return nn::unflatten(acc, *sorted.front().model);
}

void local_update(Method method, const nn::ContentModel& global, ClientState& client) {
    switch (method) {
    case Method::fedavg:
    case Method::fedprox:
    case Method::fedstyle:
        client.model = global;
        return;
    case Method::fedper:
    case Method::fedrep:
        client.model.encoder = global.encoder;
        return;
    case Method::apfl:
    case Method::ditto:
        client.global_copy = global;
        return;
    }
}

const nn::ContentModel& uploaded_model(Method method, const ClientState& client) {
    if (method == Method::apfl || method == Method::ditto) {
        if (!client.global_copy) throw std::logic_error("uploaded_model: client has no global copy");
        return *client.global_copy;
    }
    return client.model;
}

nn::ContentModel personal_model(Method method, const ClientState& client, double apfl_alpha) {
    if (method != Method::apfl) return client.model;
    if (!client.global_copy) throw std::logic_error("personal_model: client has no global copy");
    const std::vector<double> v = nn::flatten(client.model);
    const std::vector<double> w = nn::flatten(*client.global_copy);
    std::vector<double> mix(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) mix[i] = apfl_alpha * v[i] + (1.0 - apfl_alpha) * w[i];
    return nn::unflatten(mix, client.model);
}

namespace {

loss::ViewPair mix_views(const loss::ViewPair& local, const loss::ViewPair& global, nn::ContentModel& local_model,
                         double alpha) {
    ad::Tape& tape = local.z1.tape();
    loss::ViewPair out{ad::add(ad::mul_scalar(local.z1, alpha), ad::mul_scalar(ad::detach(global.z1), 1.0 - alpha)),
                       ad::add(ad::mul_scalar(local.z2, alpha), ad::mul_scalar(ad::detach(global.z2), 1.0 - alpha)),
                       std::nullopt, std::nullopt};
    if (local_model.predictor) {
        out.p1 = nn::mlp_forward(tape, *local_model.predictor, out.z1, nn::Mode::train);
        out.p2 = nn::mlp_forward(tape, *local_model.predictor, out.z2, nn::Mode::train);
    }
    return out;
}

// APFL: the global copy learns from its own loss; the local model learns
// through the mixed representation alpha * z_v + (1 - alpha) * sg(z_w).
void apfl_epochs(ClientState& c, std::size_t epochs, const TrainSettings& s, Rng& rng, LossSum& meter) {
    nn::ContentModel& w = *c.global_copy;
    nn::ContentModel& v = c.model;
    for (std::size_t e = 0; e < epochs; ++e) {
        for (const auto& batch : make_batches(c.shard.train, s.batch_size, rng)) {
            const ViewBatch views = draw_views(c.shard, batch, rng);
            const ViewBatch local_views = s.apfl_literal_views ? draw_views(c.shard, batch, rng) : views;
            ad::Tape tape;
            const loss::ViewPair gw = forward_views(tape, w, views, {});
            Var loss_g = loss::unsupervised_loss(gw, s.variant, s.tau);
            const loss::ViewPair gw_local = s.apfl_literal_views ? forward_views(tape, w, local_views, {false, false})
                                                                 : gw;
            const loss::ViewPair lv = forward_views(tape, v, local_views, {});
            // Local projections carry no predictor output here; mix_views applies it after mixing.
            loss::ViewPair lv_proj{lv.z1, lv.z2, std::nullopt, std::nullopt};
            Var loss_l = loss::unsupervised_loss(mix_views(lv_proj, gw_local, v, s.apfl_alpha), s.variant, s.tau);
            tape.backward(ad::add(loss_g, loss_l));
            step(w, s.lr, {});
            ad::sgd_step(v.encoder, s.lr);
            ad::sgd_step(v.projector, s.lr);
            if (v.predictor) ad::sgd_step(*v.predictor, s.lr);
            meter.add(loss_g.value().item());
        }
    }
}

}  // namespace

double local_training(Method method, ClientState& client, std::size_t epochs, const TrainSettings& s, Rng& rng) {
    LossSum meter;
    try {
        switch (method) {
        case Method::fedavg:
        case Method::fedper:
            ssl_epochs(client.model, client.shard, epochs, s, rng, {}, nullptr, meter);
            break;
        case Method::fedrep:
            ssl_epochs(client.model, client.shard, epochs, s, rng, {false, true}, nullptr, meter);
            ssl_epochs(client.model, client.shard, epochs, s, rng, {true, false}, nullptr, meter);
            break;
        case Method::fedprox: {
            const nn::ContentModel anchor = client.model;
            ssl_epochs(client.model, client.shard, epochs, s, rng, {}, &anchor, meter);
            break;
        }
        case Method::apfl:
            if (!client.global_copy) throw std::logic_error("apfl: client has no global copy");
            apfl_epochs(client, epochs, s, rng, meter);
            break;
        case Method::ditto: {
            if (!client.global_copy) throw std::logic_error("ditto: client has no global copy");
            ssl_epochs(*client.global_copy, client.shard, epochs, s, rng, {}, nullptr, meter);
            const nn::ContentModel anchor = *client.global_copy;
            ssl_epochs(client.model, client.shard, epochs, s, rng, {}, &anchor, meter);
            break;
        }
        case Method::fedstyle:
            return style::style_infused_training(client, epochs, s, rng);
        }
    } catch (const ad::NumericError& e) {
        throw TrainingError("client " + std::to_string(client.id()) + " (" + std::string(to_string(method)) +
                            "): non-finite value during local training: " + e.what());
    }
    if (meter.count == 0)
        throw std::invalid_argument("client " + std::to_string(client.id()) + ": fewer than 2 training samples");
    return meter.total / static_cast<double>(meter.count);
}

// --- data ----------------------------------------------------------------------

std::vector<data::StyleDataset> build_datasets(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.dataset == "synthetic") {
        data::SyntheticSpec spec;
        spec.num_classes = cfg.num_classes;
        spec.num_styles = cfg.num_styles;
        spec.per_class_count = cfg.per_class_count;
        spec.image_size = cfg.image_size;
        spec.channels = cfg.channels;
        spec.seed = seed;
        return data::generate_styled_dataset(spec);
    }
    if (cfg.dataset == "idx") {
        std::vector<data::StyleDataset> out;
        for (std::size_t i = 0; i < cfg.idx_images.size(); ++i)
            out.push_back(data::load_idx_dataset(cfg.idx_images[i], cfg.idx_labels.at(i), static_cast<int>(i)));
        return out;
    }
    if (cfg.dataset == "directory") return data::import_datasets(cfg.dataset_dir);
    throw ConfigError("dataset: unknown source '" + cfg.dataset + "'");
}

std::vector<data::DatasetShard> build_shards(const ExperimentConfig& cfg, std::span<const data::StyleDataset> datasets,
                                             std::uint64_t seed) {
    data::PartitionSpec spec;
    spec.clients_per_style = cfg.clients_per_style;
    if (!cfg.iid) spec.beta = cfg.beta;
    spec.samples_per_client = cfg.samples_per_client;
    spec.test_fraction = cfg.test_fraction;
    spec.seed = seed;
    return data::partition_all(datasets, spec);
}

// --- simulation ---------------------------------------------------------------------

namespace {

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) guarded(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) guarded(i);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::size_t input_size(const std::vector<data::DatasetShard>& shards) {
    if (shards.empty() || shards.front().samples.empty()) throw std::invalid_argument("simulation: no client data");
    const std::size_t n = shards.front().samples.front().image.size();
    for (const auto& s : shards)
        for (const auto& smp : s.samples)
            if (smp.image.size() != n) throw std::invalid_argument("simulation: images differ in size");
    return n;
}

void save_model(const fs::path& dir, const std::string& prefix, const nn::ContentModel& m) {
    nn::save_checkpoint(dir / (prefix + "encoder"), m.encoder);
    nn::save_checkpoint(dir / (prefix + "projector"), m.projector);
    if (m.predictor) nn::save_checkpoint(dir / (prefix + "predictor"), *m.predictor);
}

void load_into(const fs::path& stem, nn::ParamSet& target) {
    nn::ParamSet loaded = nn::load_checkpoint(stem);
    target = nn::unflatten(nn::flatten(loaded), target);
}

void load_model(const fs::path& dir, const std::string& prefix, nn::ContentModel& m) {
    load_into(dir / (prefix + "encoder"), m.encoder);
    load_into(dir / (prefix + "projector"), m.projector);
    if (m.predictor) load_into(dir / (prefix + "predictor"), *m.predictor);
}

}  // namespace

Simulation::Simulation(ExperimentConfig cfg, std::vector<data::DatasetShard> shards, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), settings_(train_settings(cfg_)) {
    validate(cfg_);
    dims_ = model_dims(cfg_, input_size(shards));
    for (auto& s : shards) {
        ClientState c;
        c.shard = std::move(s);
        clients_.push_back(std::move(c));
    }
    std::sort(clients_.begin(), clients_.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
    if (std::floor(cfg_.sample_ratio * static_cast<double>(clients_.size()) + 1e-9) < 1.0)
        throw ConfigError("sample_ratio: selects no client out of " + std::to_string(clients_.size()));
    initialize();
}

void Simulation::initialize() {
    Rng init = make_rng(seed_, {stream_tag("init-global")});
    global_ = nn::make_content_model(dims_, cfg_.variant == loss::Variant::simsiam, init);
    style_losses_.assign(clients_.size(), {});
    for (auto& c : clients_) {
        c.model = global_;
        c.global_copy.reset();
        c.style.reset();
        if (cfg_.method == Method::apfl || cfg_.method == Method::ditto) c.global_copy = global_;
    }
    if (cfg_.method != Method::fedstyle) return;
    parallel_for(clients_.size(), cfg_.threads, [&](std::size_t i) {
        ClientState& c = clients_[i];
        const auto id = static_cast<std::uint64_t>(c.id());
        Rng srng = make_rng(seed_, {stream_tag("init-style"), id});
        c.style = style::init_style_state(dims_, srng);
        Rng erng = make_rng(seed_, {stream_tag("style-extract"), id});
        try {
            style_losses_[i] = style::extract_style(*c.style, c.shard, cfg_.style_epochs, settings_, erng);
        } catch (const ad::NumericError& e) {
            throw TrainingError("client " + std::to_string(c.id()) +
                                ": non-finite value during style extraction: " + e.what());
        }
    });
}

RoundReport Simulation::run_round(std::size_t round) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> ids;
    for (const auto& c : clients_) ids.push_back(c.id());
    Rng srng = make_rng(seed_, {stream_tag("sample"), round});
    RoundReport report;
    report.round = round;
    report.selected = sample_clients(ids, cfg_.sample_ratio, srng);
    report.client_losses.assign(report.selected.size(), 0.0);

    std::vector<ClientState*> chosen;
    for (int id : report.selected)
        for (auto& c : clients_)
            if (c.id() == id) chosen.push_back(&c);

    parallel_for(chosen.size(), cfg_.threads, [&](std::size_t i) {
        ClientState& c = *chosen[i];
        local_update(cfg_.method, global_, c);
        Rng rng = make_rng(seed_, {stream_tag("local"), round, static_cast<std::uint64_t>(c.id())});
        try {
            report.client_losses[i] = local_training(cfg_.method, c, cfg_.local_epochs, settings_, rng);
        } catch (const TrainingError& e) {
            throw TrainingError("round " + std::to_string(round) + ": " + e.what());
        }
    });

    std::vector<Contribution> uploads;
    for (ClientState* c : chosen) uploads.push_back({c->id(), &uploaded_model(cfg_.method, *c), c->num_train()});
    global_ = aggregate(uploads);
    for (double v : nn::flatten(global_))
        if (!std::isfinite(v))
            throw TrainingError("round " + std::to_string(round) + ": aggregated global model is non-finite");
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::vector<RoundReport> Simulation::run(const std::function<void(const RoundReport&)>& on_round) {
    std::vector<RoundReport> out;
    for (std::size_t r = 1; r <= cfg_.rounds; ++r) {
        out.push_back(run_round(r));
        if (on_round) on_round(out.back());
    }
    return out;
}

void Simulation::save_state(const fs::path& dir) const {
    fs::create_directories(dir);
    save_model(dir, "global_", global_);
    for (const auto& c : clients_) {
        const fs::path cdir = dir / ("client_" + std::to_string(c.id()));
        fs::create_directories(cdir);
        save_model(cdir, "", c.model);
        if (c.global_copy) save_model(cdir, "global_copy_", *c.global_copy);
        if (c.style) {
            nn::save_checkpoint(cdir / "style_encoder", c.style->encoder);
            nn::save_checkpoint(cdir / "style_projector", c.style->projector);
            nn::save_checkpoint(cdir / "generator", c.style->generator);
        }
    }
}

void Simulation::load_state(const fs::path& dir) {
    load_model(dir, "global_", global_);
    for (auto& c : clients_) {
        const fs::path cdir = dir / ("client_" + std::to_string(c.id()));
        load_model(cdir, "", c.model);
        if (c.global_copy) load_model(cdir, "global_copy_", *c.global_copy);
        if (c.style) {
            load_into(cdir / "style_encoder", c.style->encoder);
            load_into(cdir / "style_projector", c.style->projector);
            load_into(cdir / "generator", c.style->generator);
        }
    }
}

fs::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed) {
    return fs::path(cfg.output_dir) / (std::string(to_string(cfg.method)) + "-" + std::string(loss::to_string(cfg.variant))) /
           ("seed_" + std::to_string(seed));
}

Simulation run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& run_dir) {
    validate(cfg);
    const auto datasets = build_datasets(cfg, seed);
    Simulation sim(cfg, build_shards(cfg, datasets, seed), seed);

    fs::create_directories(run_dir);
    {
        ExperimentConfig snapshot = cfg;
        snapshot.seeds = {seed};
        std::ofstream snap(run_dir / "config.toml");
        snap << to_toml(snapshot);
    }
    if (cfg.method == Method::fedstyle) {
        json pre = json::object();
        for (std::size_t i = 0; i < sim.clients().size(); ++i)
            pre[std::to_string(sim.clients()[i].id())] = sim.style_losses()[i];
        std::ofstream(run_dir / "style_pretrain.json") << pre.dump() << '\n';
    }
    std::ofstream metrics(run_dir / "metrics.jsonl");
    std::ofstream timings(run_dir / "timings.jsonl");
    if (!metrics || !timings) throw std::runtime_error("cannot write metrics under " + run_dir.string());

    sim.run([&](const RoundReport& r) {
        const double mean = std::accumulate(r.client_losses.begin(), r.client_losses.end(), 0.0) /
                            static_cast<double>(r.client_losses.size());
        json line = {{"schema_version", 1},
                     {"round", r.round},
                     {"method", std::string(to_string(cfg.method))},
                     {"variant", std::string(loss::to_string(cfg.variant))},
                     {"seed", seed},
                     {"selected", r.selected},
                     {"client_losses", r.client_losses},
                     {"mean_loss", mean}};
        metrics << line.dump() << '\n' << std::flush;
        timings << json{{"round", r.round}, {"seconds", r.seconds}}.dump() << '\n';
        if (cfg.checkpoint_every > 0 && r.round % cfg.checkpoint_every == 0 && r.round != cfg.rounds) {
            char name[32];
            std::snprintf(name, sizeof name, "round_%04zu", r.round);
            sim.save_state(run_dir / "checkpoints" / name);
        }
    });
    sim.save_state(run_dir / "final");
    return sim;
}

}  // namespace fedstyle::fl
