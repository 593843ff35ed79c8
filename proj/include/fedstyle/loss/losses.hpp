#pragma once

#include "fedstyle/ad/ops.hpp"

#include <optional>
#include <span>
#include <string_view>

namespace fedstyle::loss {

using ad::Var;

enum class Variant { simclr, simsiam };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);

/// NT-Xent over the 2B views of (z1, z2). For each anchor the positive is its
/// counterpart view and the negatives are the other 2B-2 views; rows are
/// L2-normalized first; the result is the mean over all 2B anchors.
Var nt_xent(Var z1, Var z2, double tau);

/// Supervised style InfoNCE over 2B embeddings with two balanced style labels:
///
///   sum_i 1/(2B-1) sum_{j != i, s_j = s_i} -log( exp(z_i.z_j/tau) / sum_{n != i} exp(z_i.z_n/tau) )
///
/// with L2-normalized rows. Sums over anchors, not averaged.
Var style_infonce(Var z, std::span<const int> style_labels, double tau);

/// -1/2 [cos(p1, sg(z2)) + cos(p2, sg(z1))], averaged over the batch.
Var simsiam_loss(Var p1, Var z2, Var p2, Var z1);

/// Projector outputs of the two views and, for SimSiam, the predictor outputs.
struct ViewPair {
    Var z1, z2;
    std::optional<Var> p1, p2;
};

/// The unsupervised objective selected by `variant` on one pair of views.
Var unsupervised_loss(const ViewPair& views, Variant variant, double tau);

/// clean + lambda * infused, both through the selected unsupervised loss.
Var fedstyle_total(const ViewPair& clean, const ViewPair& infused, double lambda, Variant variant, double tau);

}  // namespace fedstyle::loss
