#include "fedstyle/loss/gradcheck_suite.hpp"

#include "fedstyle/loss/losses.hpp"
#include "fedstyle/util/rng.hpp"

namespace fedstyle::loss {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

Tensor randn(ad::Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : t.values()) v = n(rng);
    return t;
}

// Weighted sum with fixed random weights, so no gradient vanishes by symmetry.
Var weighted(Var v, const Tensor& w) { return ad::sum(ad::mul(v, v.tape().constant(w))); }

}  // namespace

std::vector<NamedGradCheck> run_gradcheck_suite(std::uint64_t seed) {
    Rng rng = make_rng(seed, {stream_tag("gradcheck")});
    std::vector<NamedGradCheck> out;
    auto check = [&](std::string name, const ad::ScalarGraph& g, std::vector<Tensor> inputs) {
        out.push_back({std::move(name), ad::check_gradients(g, std::move(inputs))});
    };

    const Tensor w43 = randn({4, 3}, rng), w45 = randn({4, 5}, rng), w6 = randn({6, 4}, rng), w4 = randn({4}, rng);
    const Tensor w54 = randn({5, 4}, rng);
    check("matmul", [&](Tape&, std::span<const Var> v) { return weighted(ad::matmul(v[0], v[1]), w43); },
          {randn({4, 5}, rng), randn({5, 3}, rng)});
    check("add_broadcast_relu",
          [&](Tape&, std::span<const Var> v) { return weighted(ad::relu(ad::add(v[0], v[1])), w45); },
          {randn({4, 5}, rng), randn({5}, rng)});
    check("sub_mul_transpose",
          [&](Tape&, std::span<const Var> v) {
              return weighted(ad::transpose(ad::mul(ad::sub(v[0], v[1]), v[0])), w54);
          },
          {randn({4, 5}, rng), randn({4, 5}, rng)});
    check("exp_log", [&](Tape&, std::span<const Var> v) { return ad::sum(ad::log(ad::add_scalar(ad::exp(v[0]), 1.0))); },
          {randn({3, 3}, rng)});
    check("concat_mean_axis",
          [&](Tape&, std::span<const Var> v) { return weighted(ad::mean(ad::concat(v[0], v[1], 0), 0), w4); },
          {randn({2, 4}, rng), randn({3, 4}, rng)});
    check("scale_sum_axis_mean",
          [&](Tape&, std::span<const Var> v) {
              Var rows = weighted(ad::sum(ad::mul_scalar(v[0], -1.7), 1), w4);
              return ad::add(rows, ad::mean(ad::mul(v[0], v[0])));
          },
          {randn({4, 5}, rng)});
    check("l2_normalize", [&](Tape&, std::span<const Var> v) { return weighted(ad::l2_normalize(v[0]), w45); },
          {randn({4, 5}, rng)});
    check("cosine_sim", [&](Tape&, std::span<const Var> v) { return weighted(ad::cosine_sim(v[0], v[1]), w4); },
          {randn({4, 6}, rng), randn({4, 6}, rng)});
    Tensor keep({4, 4}, 1.0);
    for (std::size_t i = 0; i < 4; ++i) keep.at(i, i) = 0.0;
    check("masked_logsumexp",
          [&](Tape&, std::span<const Var> v) { return weighted(ad::masked_logsumexp(v[0], keep), w4); },
          {randn({4, 4}, rng)});
    const std::vector<int> labels{0, 2, 1, 2};
    check("softmax_cross_entropy",
          [&](Tape&, std::span<const Var> v) { return ad::softmax_cross_entropy(v[0], labels); },
          {randn({4, 3}, rng)});
    check("batchnorm_train",
          [&](Tape&, std::span<const Var> v) {
              return weighted(ad::batchnorm1d(v[0], v[1], v[2], {}, nullptr, nullptr), w6);
          },
          {randn({6, 4}, rng), randn({4}, rng), randn({4}, rng)});
    Tensor rm({4}, 0.1), rv({4}, 0.8);
    check("batchnorm_eval",
          [&](Tape&, std::span<const Var> v) {
              ad::BatchNormOptions o;
              o.training = false;
              return weighted(ad::batchnorm1d(v[0], v[1], v[2], o, &rm, &rv), w6);
          },
          {randn({6, 4}, rng), randn({4}, rng), randn({4}, rng)});
    check("nt_xent", [&](Tape&, std::span<const Var> v) { return nt_xent(v[0], v[1], 0.5); },
          {randn({4, 5}, rng), randn({4, 5}, rng)});
    const std::vector<int> styles{0, 0, 0, 1, 1, 1};
    check("style_infonce", [&](Tape&, std::span<const Var> v) { return style_infonce(v[0], styles, 0.5); },
          {randn({6, 5}, rng)});
    // Stop-gradient blocks the z branches, so only the predictor outputs are perturbed.
    const Tensor sz1 = randn({3, 4}, rng), sz2 = randn({3, 4}, rng);
    check("simsiam",
          [&](Tape& t, std::span<const Var> v) { return simsiam_loss(v[0], t.constant(sz2), v[1], t.constant(sz1)); },
          {randn({3, 4}, rng), randn({3, 4}, rng)});
    const Tensor gw = randn({8, 4}, rng);
    check("fedstyle_total",
          [&](Tape& t, std::span<const Var> v) {
              // v: h1, h2, h_s, h_sobel; a linear generator on concat[h, s].
              Var g = t.constant(gw);
              Var f1 = ad::add(v[0], ad::relu(ad::matmul(ad::concat(v[0], v[2], 1), g)));
              Var f2 = ad::add(v[1], ad::relu(ad::matmul(ad::concat(v[1], v[3], 1), g)));
              return fedstyle_total({v[0], v[1], {}, {}}, {f1, f2, {}, {}}, 0.5, Variant::simclr, 0.5);
          },
          {randn({3, 4}, rng), randn({3, 4}, rng), randn({3, 4}, rng), randn({3, 4}, rng)});
    return out;
}

}  // namespace fedstyle::loss
