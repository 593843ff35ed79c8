#include "fedstyle/eval/probe.hpp"

#include "fedstyle/ad/ops.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace fedstyle::eval {

using ad::Tensor;
using ad::Var;

LinearProbe init_probe(std::size_t dim, int num_classes, Rng& rng) {
    if (dim == 0 || num_classes < 2) throw std::invalid_argument("init_probe: need a feature dimension and 2+ classes");
    const auto k = static_cast<std::size_t>(num_classes);
    LinearProbe p{Tensor({dim, k}), Tensor({k}, 0.0), Tensor({dim}, 0.0), Tensor({dim}, 1.0), 0};
    std::normal_distribution<double> normal(0.0, 0.01);
    for (double& w : p.weight.values()) w = normal(rng);
    return p;
}

namespace {

void column_stats(const Tensor& x, Tensor& mean, Tensor& var) {
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    mean = Tensor({d}, 0.0);
    var = Tensor({d}, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += x.at(i, j);
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (x.at(i, j) - m) * (x.at(i, j) - m);
        mean[j] = m;
        var[j] = v / static_cast<double>(n);
    }
}

}  // namespace

LinearProbe train_probe_graph(const FeatureGraph& features, std::span<const int> labels, int num_classes,
                              const ProbeSettings& settings, const std::function<void()>& after_step) {
    if (std::set<int>(labels.begin(), labels.end()).size() < 2)
        throw std::invalid_argument("train_linear_probe: labels hold a single class");
    for (int y : labels)
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("train_linear_probe: label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
    Tensor probe_shape;
    {
        ad::Tape tape;
        probe_shape = features(tape).value();
    }
    if (probe_shape.rank() != 2 || probe_shape.shape()[0] != labels.size())
        throw ad::ShapeError("train_linear_probe: features must be [N x D] with one label per row");
    const std::size_t d = probe_shape.shape()[1];

    Rng rng = make_rng(settings.seed, {stream_tag("probe-init")});
    LinearProbe p = init_probe(d, num_classes, rng);
    p.weight.set_requires_grad(true);
    p.bias.set_requires_grad(true);
    ad::BatchNormOptions standardize;
    standardize.eps = kProbeEps;
    for (std::size_t e = 0; e < settings.epochs; ++e) {
        ad::Tape tape;
        Var f = features(tape);
        Var fz = ad::batchnorm1d(f, tape.constant(Tensor({d}, 1.0)), tape.constant(Tensor({d}, 0.0)), standardize,
                                 nullptr, nullptr);
        Var logits = ad::add(ad::matmul(fz, tape.leaf(p.weight)), tape.leaf(p.bias));
        tape.backward(ad::softmax_cross_entropy(logits, labels));
        for (Tensor* t : {&p.weight, &p.bias}) {
            auto v = t->values().begin();
            for (double g : t->grad()) *v++ -= settings.lr * g;
            t->zero_grad();
        }
        if (after_step) after_step();
    }
    {
        ad::Tape tape;
        column_stats(features(tape).value(), p.mean, p.var);
    }
    for (Tensor* t : {&p.weight, &p.bias}) {
        t->clear_grad();
        t->set_requires_grad(false);
    }
    p.epochs = settings.epochs;
    return p;
}

LinearProbe train_linear_probe(const Tensor& features, std::span<const int> labels, int num_classes,
                               const ProbeSettings& settings) {
    return train_probe_graph([&](ad::Tape& tape) { return tape.constant(features); }, labels, num_classes, settings);
}

Tensor probe_logits(const LinearProbe& probe, const Tensor& features) {
    if (features.rank() != 2 || features.shape()[1] != probe.weight.shape()[0])
        throw ad::ShapeError("probe_logits: feature width does not match the probe");
    const std::size_t n = features.shape()[0], d = features.shape()[1], k = probe.weight.shape()[1];
    Tensor out({n, k});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) {
            double s = probe.bias[c];
            for (std::size_t j = 0; j < d; ++j)
                s += (features.at(i, j) - probe.mean[j]) / std::sqrt(probe.var[j] + kProbeEps) * probe.weight.at(j, c);
            out.at(i, c) = s;
        }
    return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw ad::ShapeError("argmax_rows: expected [N x K]");
    const std::size_t n = logits.shape()[0], k = logits.shape()[1];
    std::vector<int> out(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 1; j < k; ++j)
            if (logits.at(i, j) > logits.at(i, static_cast<std::size_t>(out[i]))) out[i] = static_cast<int>(j);
    return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size() || labels.empty())
        throw std::invalid_argument("accuracy: need equal, non-empty prediction and label lists");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace fedstyle::eval
