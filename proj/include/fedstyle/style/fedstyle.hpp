#pragma once

#include "fedstyle/fl/client.hpp"

#include <span>
#include <vector>

namespace fedstyle::style {

using fl::ClientState;
using fl::StyleState;
using fl::TrainSettings;

/// Fresh style encoder (same architecture as the content encoder), its
/// projector, and the generator.
StyleState init_style_state(const nn::ModelDims& dims, Rng& rng);

/// Original and Sobel-filtered copies of a batch stacked as [2B x D], with
/// style label 0 for originals and 1 for Sobel images.
struct StyleBatch {
    ad::Tensor x;
    std::vector<int> labels;
};
StyleBatch sobel_pair_batch(const data::DatasetShard& shard, std::span<const std::size_t> batch);

/// Trains the style encoder and projector with the style InfoNCE loss for
/// `epochs` passes over the client's training split. Returns the mean loss
/// of each epoch. The generator is untouched.
std::vector<double> extract_style(StyleState& style, const data::DatasetShard& shard, std::size_t epochs,
                                  const TrainSettings& settings, Rng& rng);

/// h_c + G(concat[h_c, h_s]).
ad::Var personalized_feature(ad::Tape& tape, ad::Var h_content, ad::Var h_style, nn::ParamSet& generator,
                             bool trainable = true);

/// Frozen style features f_ws(x) (eval mode).
ad::Tensor style_features(const StyleState& style, const ad::Tensor& x);

/// One local round of style-infused training: per batch, the clean loss on
/// two augmented views plus lambda times the loss on the views re-styled by
/// the generator (view 1 with the sample's own style, view 2 with the style
/// of its Sobel copy). Updates encoder, projector, predictor and, unless
/// settings.freeze_generator, the generator. Returns the mean batch loss.
double style_infused_training(ClientState& client, std::size_t epochs, const TrainSettings& settings, Rng& rng);

/// Mean cosine similarity of style embeddings g_ws(f_ws(x)) within the same
/// style minus across styles, over the training images and their Sobel copies.
double style_separation(const StyleState& style, const data::DatasetShard& shard);

/// Variance of generator outputs across the client's training samples,
/// averaged over output dimensions.
double generator_output_variance(const ClientState& client);

}  // namespace fedstyle::style
