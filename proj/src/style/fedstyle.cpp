#include "fedstyle/style/fedstyle.hpp"

#include <cmath>

namespace fedstyle::style {

using ad::Tensor;
using ad::Var;

StyleState init_style_state(const nn::ModelDims& dims, Rng& rng) {
    StyleState s;
    s.encoder = nn::make_mlp(nn::encoder_spec(dims), rng, "style_encoder");
    s.projector = nn::make_mlp(nn::projector_spec(dims), rng, "style_projector");
    s.generator = nn::make_mlp(nn::generator_spec(dims), rng, "generator");
    return s;
}

StyleBatch sobel_pair_batch(const data::DatasetShard& shard, std::span<const std::size_t> batch) {
    std::vector<data::Image> images;
    images.reserve(2 * batch.size());
    for (std::size_t i : batch) images.push_back(shard.samples.at(i).image);
    for (std::size_t i : batch) images.push_back(data::sobel_filter(shard.samples.at(i).image));
    StyleBatch out{data::to_batch(std::span<const data::Image>(images)), {}};
    out.labels.assign(batch.size(), 0);
    out.labels.resize(2 * batch.size(), 1);
    return out;
}

std::vector<double> extract_style(StyleState& style, const data::DatasetShard& shard, std::size_t epochs,
                                  const TrainSettings& settings, Rng& rng) {
    std::vector<double> losses;
    for (std::size_t e = 0; e < epochs; ++e) {
        double total = 0.0;
        const auto batches = fl::make_batches(shard.train, settings.batch_size, rng);
        if (batches.empty()) throw std::invalid_argument("extract_style: client has fewer than 2 training samples");
        for (const auto& batch : batches) {
            const StyleBatch sb = sobel_pair_batch(shard, batch);
            ad::Tape tape;
            Var h = nn::mlp_forward(tape, style.encoder, tape.constant(sb.x), nn::Mode::train);
            Var z = nn::mlp_forward(tape, style.projector, h, nn::Mode::train);
            Var loss = loss::style_infonce(z, sb.labels, settings.tau);
            tape.backward(loss);
            ad::sgd_step(style.encoder, settings.lr);
            ad::sgd_step(style.projector, settings.lr);
            total += loss.value().item();
        }
        losses.push_back(total / static_cast<double>(batches.size()));
    }
    style.pretrain_epochs += epochs;
    return losses;
}

Var personalized_feature(ad::Tape& tape, Var h_content, Var h_style, nn::ParamSet& generator, bool trainable) {
    return ad::add(h_content, nn::generator_forward(tape, generator, h_content, h_style, trainable));
}

Tensor style_features(const StyleState& style, const Tensor& x) { return nn::mlp_infer(style.encoder, x); }

double style_infused_training(ClientState& client, std::size_t epochs, const TrainSettings& settings, Rng& rng) {
    if (!client.style) throw std::logic_error("style_infused_training: client has no style state");
    StyleState& st = *client.style;
    nn::ContentModel& m = client.model;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
        const auto batches = fl::make_batches(client.shard.train, settings.batch_size, rng);
        for (const auto& batch : batches) {
            const fl::ViewBatch views = fl::draw_views(client.shard, batch, rng);
            const StyleBatch sb = sobel_pair_batch(client.shard, batch);
            const Tensor hs_all = style_features(st, sb.x);
            const std::size_t b = batch.size(), d = hs_all.shape()[1];
            Tensor h_s({b, d}), h_sobel({b, d});
            std::copy_n(hs_all.data().begin(), b * d, h_s.values().begin());
            std::copy_n(hs_all.data().begin() + static_cast<std::ptrdiff_t>(b * d), b * d, h_sobel.values().begin());

            ad::Tape tape;
            Var h1, h2;
            const loss::ViewPair clean = fl::forward_views(tape, m, views, {}, &h1, &h2);
            const bool gen_trainable = !settings.freeze_generator;
            Var f1 = personalized_feature(tape, h1, tape.constant(std::move(h_s)), st.generator, gen_trainable);
            Var f2 = personalized_feature(tape, h2, tape.constant(std::move(h_sobel)), st.generator, gen_trainable);
            const loss::ViewPair infused = fl::project_views(tape, m, f1, f2, true);
            Var loss = loss::fedstyle_total(clean, infused, settings.lambda, settings.variant, settings.tau);
            tape.backward(loss);
            fl::step(m, settings.lr, {});
            if (gen_trainable) ad::sgd_step(st.generator, settings.lr);
            total += loss.value().item();
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("style_infused_training: client has fewer than 2 training samples");
    return total / static_cast<double>(count);
}

namespace {

Tensor normalized_rows(const Tensor& z) {
    Tensor out = z;
    const std::size_t n = z.shape()[0], d = z.shape()[1];
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm += z.at(i, j) * z.at(i, j);
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = norm > ad::kNormalizeEps ? z.at(i, j) / norm : 0.0;
    }
    return out;
}

}  // namespace

double style_separation(const StyleState& style, const data::DatasetShard& shard) {
    const StyleBatch sb = sobel_pair_batch(shard, shard.train);
    const Tensor z = normalized_rows(nn::mlp_infer(style.projector, style_features(style, sb.x)));
    const std::size_t n = z.shape()[0], d = z.shape()[1];
    double same = 0.0, cross = 0.0;
    std::size_t n_same = 0, n_cross = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double c = 0.0;
            for (std::size_t k = 0; k < d; ++k) c += z.at(i, k) * z.at(j, k);
            if (sb.labels[i] == sb.labels[j]) {
                same += c;
                ++n_same;
            } else {
                cross += c;
                ++n_cross;
            }
        }
    return same / static_cast<double>(n_same) - cross / static_cast<double>(n_cross);
}

double generator_output_variance(const ClientState& client) {
    if (!client.style) throw std::logic_error("generator_output_variance: client has no style state");
    const Tensor x = fl::raw_batch(client.shard, client.shard.train);
    const Tensor h_c = fl::encode(client.model, x);
    const Tensor h_s = style_features(*client.style, x);
    nn::ParamSet gen = client.style->generator;
    ad::Tape tape;
    const Tensor g = nn::generator_forward(tape, gen, tape.constant(h_c), tape.constant(h_s), false).value();
    const std::size_t n = g.shape()[0], d = g.shape()[1];
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += g.at(i, k);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (g.at(i, k) - mean) * (g.at(i, k) - mean);
        acc += var / static_cast<double>(n);
    }
    return acc / static_cast<double>(d);
}

}  // namespace fedstyle::style
