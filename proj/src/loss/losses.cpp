#include "fedstyle/loss/losses.hpp"

#include <map>
#include <stdexcept>
#include <string>

namespace fedstyle::loss {

using ad::Tensor;

Variant parse_variant(std::string_view name) {
    if (name == "simclr") return Variant::simclr;
    if (name == "simsiam") return Variant::simsiam;
    throw std::invalid_argument("unknown ssl variant '" + std::string(name) + "' (expected simclr or simsiam)");
}

std::string_view to_string(Variant v) { return v == Variant::simclr ? "simclr" : "simsiam"; }

namespace {

void check_tau(double tau, const char* who) {
    if (!(tau > 0.0)) throw std::invalid_argument(std::string(who) + ": temperature must be positive");
}

// Scaled cosine logits of the L2-normalized rows of z: [N x N].
Var similarity_logits(Var z, double tau) {
    Var zn = ad::l2_normalize(z, 1);
    return ad::mul_scalar(ad::matmul(zn, ad::transpose(zn)), 1.0 / tau);
}

Tensor off_diagonal(std::size_t n) {
    Tensor keep({n, n}, 1.0);
    for (std::size_t i = 0; i < n; ++i) keep.at(i, i) = 0.0;
    return keep;
}

}  // namespace

Var nt_xent(Var z1, Var z2, double tau) {
    check_tau(tau, "nt_xent");
    if (z1.shape() != z2.shape() || z1.value().rank() != 2)
        throw ad::ShapeError("nt_xent: views must be equal [B x D] tensors");
    const std::size_t b = z1.shape()[0];
    const std::size_t n = 2 * b;
    ad::Tape& tape = z1.tape();

    Var logits = similarity_logits(ad::concat(z1, z2, 0), tau);
    Tensor positive({n, n}, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        positive.at(i, i + b) = 1.0;
        positive.at(i + b, i) = 1.0;
    }
    Var lse = ad::masked_logsumexp(logits, off_diagonal(n));
    Var pos = ad::sum(ad::mul(logits, tape.constant(std::move(positive))), 1);
    return ad::mean(ad::sub(lse, pos));
}

Var style_infonce(Var z, std::span<const int> style_labels, double tau) {
    check_tau(tau, "style_infonce");
    if (z.value().rank() != 2) throw ad::ShapeError("style_infonce: embeddings must be [2B x D]");
    const std::size_t n = z.shape()[0];
    if (style_labels.size() != n)
        throw std::invalid_argument("style_infonce: " + std::to_string(style_labels.size()) +
                                    " labels for " + std::to_string(n) + " embeddings");
    std::map<int, std::size_t> counts;
    for (int s : style_labels) ++counts[s];
    if (n % 2 != 0 || counts.size() != 2 || counts.begin()->second != n / 2)
        throw std::invalid_argument("style_infonce: labels must hold exactly two styles with B entries each");

    Tensor positive({n, n}, 0.0);
    Tensor per_anchor({n}, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && style_labels[i] == style_labels[j]) {
                positive.at(i, j) = 1.0;
                per_anchor[i] += 1.0;
            }

    ad::Tape& tape = z.tape();
    Var logits = similarity_logits(z, tau);
    Var lse = ad::masked_logsumexp(logits, off_diagonal(n));
    Var denominators = ad::sum(ad::mul(lse, tape.constant(std::move(per_anchor))));
    Var numerators = ad::sum(ad::mul(logits, tape.constant(std::move(positive))));
    return ad::mul_scalar(ad::sub(denominators, numerators), 1.0 / static_cast<double>(n - 1));
}

Var simsiam_loss(Var p1, Var z2, Var p2, Var z1) {
    if (p1.shape() != z2.shape() || p2.shape() != z1.shape() || p1.shape() != p2.shape())
        throw ad::ShapeError("simsiam_loss: predictor and projector outputs must share one shape");
    Var a = ad::mean(ad::cosine_sim(p1, ad::detach(z2)));
    Var b = ad::mean(ad::cosine_sim(p2, ad::detach(z1)));
    return ad::mul_scalar(ad::add(a, b), -0.5);
}

Var unsupervised_loss(const ViewPair& views, Variant variant, double tau) {
    switch (variant) {
    case Variant::simclr:
        return nt_xent(views.z1, views.z2, tau);
    case Variant::simsiam:
        if (!views.p1 || !views.p2) throw std::invalid_argument("simsiam loss needs predictor outputs");
        return simsiam_loss(*views.p1, views.z2, *views.p2, views.z1);
    }
    throw std::invalid_argument("unknown ssl variant");
}

Var fedstyle_total(const ViewPair& clean, const ViewPair& infused, double lambda, Variant variant, double tau) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("fedstyle_total: lambda must be non-negative");
    Var c = unsupervised_loss(clean, variant, tau);
    Var s = unsupervised_loss(infused, variant, tau);
    return ad::add(c, ad::mul_scalar(s, lambda));
}

}  // namespace fedstyle::loss
