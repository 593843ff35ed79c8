#include "fedstyle/fl/client.hpp"

#include <algorithm>

namespace fedstyle::fl {

using ad::Tensor;
using ad::Var;

TrainSettings train_settings(const ExperimentConfig& cfg) {
    TrainSettings s;
    s.variant = cfg.variant;
    s.tau = cfg.tau;
    s.lr = cfg.lr;
    s.batch_size = cfg.batch_size;
    s.mu = effective_mu(cfg);
    s.apfl_alpha = cfg.apfl_alpha;
    s.apfl_literal_views = cfg.apfl_literal_views;
    s.lambda = cfg.lambda;
    s.freeze_generator = cfg.freeze_generator_pretrain;
    return s;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> indices, std::size_t batch_size,
                                                   Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be positive");
    std::vector<std::size_t> order(indices.begin(), indices.end());
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const std::size_t end = std::min(order.size(), i + batch_size);
        if (end - i < 2) break;
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

ViewBatch draw_views(const data::DatasetShard& shard, std::span<const std::size_t> batch, Rng& rng) {
    std::vector<data::Image> v1, v2;
    v1.reserve(batch.size());
    v2.reserve(batch.size());
    for (std::size_t i : batch) {
        const data::Image& img = shard.samples.at(i).image;
        v1.push_back(data::augment(img, rng));
        v2.push_back(data::augment(img, rng));
    }
    return {data::to_batch(std::span<const data::Image>(v1)), data::to_batch(std::span<const data::Image>(v2))};
}

Tensor raw_batch(const data::DatasetShard& shard, std::span<const std::size_t> batch) {
    std::vector<const data::Image*> ptrs;
    ptrs.reserve(batch.size());
    for (std::size_t i : batch) ptrs.push_back(&shard.samples.at(i).image);
    return data::to_batch(std::span<const data::Image* const>(ptrs));
}

loss::ViewPair project_views(ad::Tape& tape, nn::ContentModel& m, Var h1, Var h2, bool trainable) {
    loss::ViewPair out{nn::mlp_forward(tape, m.projector, h1, nn::Mode::train, trainable),
                       nn::mlp_forward(tape, m.projector, h2, nn::Mode::train, trainable),
                       std::nullopt, std::nullopt};
    if (m.predictor) {
        out.p1 = nn::mlp_forward(tape, *m.predictor, out.z1, nn::Mode::train, trainable);
        out.p2 = nn::mlp_forward(tape, *m.predictor, out.z2, nn::Mode::train, trainable);
    }
    return out;
}

loss::ViewPair forward_views(ad::Tape& tape, nn::ContentModel& m, const ViewBatch& views, Trainable t, Var* h1_out,
                             Var* h2_out) {
    const nn::Mode mode = t.encoder ? nn::Mode::train : nn::Mode::eval;
    Var h1 = nn::mlp_forward(tape, m.encoder, tape.constant(views.x1), mode, t.encoder);
    Var h2 = nn::mlp_forward(tape, m.encoder, tape.constant(views.x2), mode, t.encoder);
    if (h1_out) *h1_out = h1;
    if (h2_out) *h2_out = h2;
    return project_views(tape, m, h1, h2, t.head);
}

void step(nn::ContentModel& m, double lr, Trainable t) {
    if (t.encoder) ad::sgd_step(m.encoder, lr);
    else m.encoder.clear_grads();
    if (t.head) {
        ad::sgd_step(m.projector, lr);
        if (m.predictor) ad::sgd_step(*m.predictor, lr);
    } else {
        m.projector.clear_grads();
        if (m.predictor) m.predictor->clear_grads();
    }
}

namespace {

Var proximal_term(ad::Tape& tape, nn::ContentModel& m, const nn::ContentModel& anchor, double mu) {
    auto mp = nn::parts(m);
    auto ap = nn::parts(anchor);
    Var total = nn::squared_distance(tape, *mp[0], *ap[0]);
    for (std::size_t i = 1; i < mp.size(); ++i) total = ad::add(total, nn::squared_distance(tape, *mp[i], *ap[i]));
    return ad::mul_scalar(total, 0.5 * mu);
}

}  // namespace

void ssl_epochs(nn::ContentModel& m, const data::DatasetShard& shard, std::size_t epochs, const TrainSettings& s,
                Rng& rng, Trainable t, const nn::ContentModel* anchor, LossSum& losses) {
    for (std::size_t e = 0; e < epochs; ++e) {
        for (const auto& batch : make_batches(shard.train, s.batch_size, rng)) {
            const ViewBatch views = draw_views(shard, batch, rng);
            ad::Tape tape;
            Var loss = loss::unsupervised_loss(forward_views(tape, m, views, t), s.variant, s.tau);
            if (anchor) loss = ad::add(loss, proximal_term(tape, m, *anchor, s.mu));
            tape.backward(loss);
            step(m, s.lr, t);
            losses.add(loss.value().item());
        }
    }
}

Tensor encode(const nn::ContentModel& m, const Tensor& x) { return nn::mlp_infer(m.encoder, x); }

}  // namespace fedstyle::fl
