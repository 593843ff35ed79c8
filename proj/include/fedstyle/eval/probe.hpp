#pragma once

#include "fedstyle/ad/tape.hpp"
#include "fedstyle/util/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fedstyle::eval {

struct ProbeSettings {
    std::size_t epochs = 100;
    double lr = 0.1;
    std::uint64_t seed = 0;
};

/// Softmax classifier on standardized features:
/// logits = ((x - mean) / sqrt(var + eps)) W + b.
struct LinearProbe {
    ad::Tensor weight;  // [D x K]
    ad::Tensor bias;    // [K]
    ad::Tensor mean;    // [D], training-feature statistics
    ad::Tensor var;     // [D], biased
    std::size_t epochs = 0;
};

inline constexpr double kProbeEps = 1e-5;

/// W ~ N(0, 0.01^2), b = 0.
LinearProbe init_probe(std::size_t dim, int num_classes, Rng& rng);

/// Builds the [N x D] training features on a tape; may involve trainable leaves.
using FeatureGraph = std::function<ad::Var(ad::Tape&)>;

/// Full-batch gradient descent on mean softmax cross-entropy of the
/// standardized features. `after_step` runs after each backward pass so
/// callers can update their own leaves. The stored statistics are those of
/// the final features.
LinearProbe train_probe_graph(const FeatureGraph& features, std::span<const int> labels, int num_classes,
                              const ProbeSettings& settings, const std::function<void()>& after_step = {});

/// train_probe_graph on fixed features.
LinearProbe train_linear_probe(const ad::Tensor& features, std::span<const int> labels, int num_classes,
                               const ProbeSettings& settings);

ad::Tensor probe_logits(const LinearProbe& probe, const ad::Tensor& features);

/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> argmax_rows(const ad::Tensor& logits);

double accuracy(std::span<const int> predicted, std::span<const int> labels);

}  // namespace fedstyle::eval
