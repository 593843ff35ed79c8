#pragma once

#include "fedstyle/data/dataset.hpp"
#include "fedstyle/fl/config.hpp"
#include "fedstyle/loss/losses.hpp"
#include "fedstyle/nn/models.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace fedstyle::fl {

/// Frozen style extractor f_ws, its projector g_ws, and the stylization generator G.
struct StyleState {
    nn::ParamSet encoder;
    nn::ParamSet projector;
    nn::ParamSet generator;
    std::size_t pretrain_epochs = 0;

    friend bool operator==(const StyleState&, const StyleState&) = default;
};

/// Everything a client keeps between rounds.
struct ClientState {
    data::DatasetShard shard;
    nn::ContentModel model;                       // w_k (w_{c,k} under FedStyle)
    std::optional<nn::ContentModel> global_copy;  // w_{k,g} for APFL and Ditto
    std::optional<StyleState> style;              // FedStyle only

    int id() const { return shard.client_id; }
    std::size_t num_train() const { return shard.train.size(); }
};

/// Local optimization knobs shared by every method.
struct TrainSettings {
    loss::Variant variant = loss::Variant::simclr;
    double tau = 0.07;
    double lr = 0.1;
    std::size_t batch_size = 64;
    double mu = 0.0;
    double apfl_alpha = 0.5;
    bool apfl_literal_views = false;
    double lambda = 0.5;
    bool freeze_generator = false;
};

TrainSettings train_settings(const ExperimentConfig& cfg);

/// Raised when a loss or gradient turns non-finite during local training.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shuffles the indices and cuts them into batches of batch_size; a trailing
/// batch with fewer than 2 samples is dropped.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> indices, std::size_t batch_size,
                                                   Rng& rng);

/// Two independently augmented views of each sample, as [B x D] tensors.
struct ViewBatch {
    ad::Tensor x1, x2;
};
ViewBatch draw_views(const data::DatasetShard& shard, std::span<const std::size_t> batch, Rng& rng);

/// Un-augmented samples as a [B x D] tensor.
ad::Tensor raw_batch(const data::DatasetShard& shard, std::span<const std::size_t> batch);

/// Which parts of a content model receive gradients. Frozen encoders run in
/// eval mode so their batch-norm buffers stay fixed.
struct Trainable {
    bool encoder = true;
    bool head = true;  // projector and predictor
};

/// Projector (and predictor) outputs for two feature batches.
loss::ViewPair project_views(ad::Tape& tape, nn::ContentModel& m, ad::Var h1, ad::Var h2, bool trainable);

/// Encoder features followed by project_views.
loss::ViewPair forward_views(ad::Tape& tape, nn::ContentModel& m, const ViewBatch& views, Trainable t,
                             ad::Var* h1_out = nullptr, ad::Var* h2_out = nullptr);

/// SGD on the parts marked trainable; clears their gradients.
void step(nn::ContentModel& m, double lr, Trainable t);

/// Running sum of batch losses.
struct LossSum {
    double total = 0.0;
    std::size_t count = 0;
    void add(double v) {
        total += v;
        ++count;
    }
};

/// `epochs` passes of the plain unsupervised loss over the training split,
/// plus mu/2 * ||m - anchor||^2 when an anchor is given. Parts not marked
/// trainable stay bitwise unchanged.
void ssl_epochs(nn::ContentModel& m, const data::DatasetShard& shard, std::size_t epochs, const TrainSettings& s,
                Rng& rng, Trainable t, const nn::ContentModel* anchor, LossSum& losses);

/// Encoder features in eval mode.
ad::Tensor encode(const nn::ContentModel& m, const ad::Tensor& x);

}  // namespace fedstyle::fl
