#pragma once

#include "fedstyle/fl/client.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace fedstyle::fl {

/// floor(ratio * n) client ids drawn uniformly without replacement, ascending.
std::vector<int> sample_clients(std::span<const int> client_ids, double ratio, Rng& rng);

/// One uploaded model and its weight |D_k|.
struct Contribution {
    int client_id = 0;
    const nn::ContentModel* model = nullptr;
    std::size_t samples = 0;
};

/// Sample-weighted mean sum_k |D_k| / sum_j |D_j| * w_k over every entry,
/// buffers included, accumulated in ascending client id order.
nn::ContentModel aggregate(std::span<const Contribution> uploads);

/// Overwrites the client's copy of the shared parameters with the global
/// model. FedPer and FedRep keep their local head; APFL and Ditto only
/// receive it into the global copy.
void local_update(Method method, const nn::ContentModel& global, ClientState& client);

/// E_l local epochs of `method`. Returns the mean batch loss.
/// Throws TrainingError naming the client when values turn non-finite.
double local_training(Method method, ClientState& client, std::size_t epochs, const TrainSettings& settings,
                      Rng& rng);

/// Model the client sends to the server after local training.
const nn::ContentModel& uploaded_model(Method method, const ClientState& client);

/// Model behind the client's personalized representation. For APFL this is
/// the parameter mixture alpha * v_k + (1 - alpha) * w_{k,g}.
nn::ContentModel personal_model(Method method, const ClientState& client, double apfl_alpha);

struct RoundReport {
    std::size_t round = 0;
    std::vector<int> selected;
    std::vector<double> client_losses;  // aligned with selected
    double seconds = 0.0;
};

/// Builds the style datasets of a configuration (synthetic, IDX or an exported directory).
std::vector<data::StyleDataset> build_datasets(const ExperimentConfig& cfg, std::uint64_t seed);
std::vector<data::DatasetShard> build_shards(const ExperimentConfig& cfg, std::span<const data::StyleDataset> datasets,
                                             std::uint64_t seed);

/// One federated run: server model, client states and the round loop.
class Simulation {
public:
    Simulation(ExperimentConfig cfg, std::vector<data::DatasetShard> shards, std::uint64_t seed);

    /// Fresh models; under FedStyle also the style pretraining. Called by the constructor.
    void initialize();

    RoundReport run_round(std::size_t round);

    /// Runs rounds 1..cfg.rounds, calling `on_round` after each.
    std::vector<RoundReport> run(const std::function<void(const RoundReport&)>& on_round = {});

    const ExperimentConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    const nn::ContentModel& global() const { return global_; }
    std::vector<ClientState>& clients() { return clients_; }
    const std::vector<ClientState>& clients() const { return clients_; }
    const nn::ModelDims& dims() const { return dims_; }
    /// Per-client mean style-pretraining loss of each epoch (FedStyle).
    const std::vector<std::vector<double>>& style_losses() const { return style_losses_; }

    /// Global model and every client's models under `dir`.
    void save_state(const std::filesystem::path& dir) const;
    /// Restores a state written by save_state for the same configuration.
    void load_state(const std::filesystem::path& dir);

private:
    ExperimentConfig cfg_;
    std::uint64_t seed_;
    nn::ModelDims dims_;
    TrainSettings settings_;
    nn::ContentModel global_;
    std::vector<ClientState> clients_;
    std::vector<std::vector<double>> style_losses_;
};

/// Full experiment for one seed: data, training, metrics.jsonl (one line per
/// round), timings.jsonl, checkpoints and config snapshot under `run_dir`.
Simulation run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& run_dir);

/// <output_dir>/<method>-<variant>/seed_<seed>
std::filesystem::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace fedstyle::fl
