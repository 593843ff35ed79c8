#pragma once

#include "fedstyle/ad/ops.hpp"
#include "fedstyle/ad/param_set.hpp"
#include "fedstyle/util/rng.hpp"

#include <optional>
#include <span>
#include <vector>

namespace fedstyle::nn {

using ad::ParamSet;
using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Layer widths of a perceptron. Hidden layers are Linear -> [BatchNorm] -> ReLU;
/// the output layer is Linear only.
struct MlpSpec {
    std::size_t input = 0;
    std::vector<std::size_t> hidden;
    std::size_t output = 0;
    bool batchnorm = false;
};

enum class Mode { train, eval };

/// Network dimensions of one experiment.
struct ModelDims {
    std::size_t input = 0;                            // flattened pixels
    std::vector<std::size_t> encoder_hidden{256, 128};
    std::size_t feature = 64;                         // D_h
    std::size_t projector_hidden = 64;
    std::size_t projection = 32;                      // D_z
    std::size_t generator_hidden = 64;
    std::size_t predictor_hidden = 16;
};

MlpSpec encoder_spec(const ModelDims& dims);
MlpSpec projector_spec(const ModelDims& dims);
MlpSpec generator_spec(const ModelDims& dims);
MlpSpec predictor_spec(const ModelDims& dims);

/// Entries are named fc<i>.weight [in x out], fc<i>.bias [out] and, for
/// batch-normalized hidden layers, bn<i>.gamma, bn<i>.beta plus the buffers
/// bn<i>.running_mean and bn<i>.running_var. Weights and biases are drawn
/// from U(-1/sqrt(in), 1/sqrt(in)).
ParamSet make_mlp(const MlpSpec& spec, Rng& rng, std::string tag);

/// Forward pass of a network built by make_mlp. In train mode batch norm
/// uses batch statistics and updates the running buffers. When `trainable`
/// is false the parameters enter the tape as constants.
Var mlp_forward(Tape& tape, ParamSet& params, Var x, Mode mode, bool trainable = true);

/// Same as mlp_forward with a zero-initialized tape, eval mode, returning values.
Tensor mlp_infer(const ParamSet& params, const Tensor& x);

/// G(concat[h_c, h_s]); both inputs are [B x D_h].
Var generator_forward(Tape& tape, ParamSet& generator, Var h_content, Var h_style, bool trainable = true);

/// Content model w: encoder f, projector g and, for SimSiam, a predictor.
struct ContentModel {
    ParamSet encoder;
    ParamSet projector;
    std::optional<ParamSet> predictor;

    friend bool operator==(const ContentModel&, const ContentModel&) = default;
};

ContentModel make_content_model(const ModelDims& dims, bool with_predictor, Rng& rng);

/// Mutable views of the model's parameter sets in canonical order.
std::vector<ParamSet*> parts(ContentModel& m);
std::vector<const ParamSet*> parts(const ContentModel& m);

// --- flatten / unflatten -------------------------------------------------

/// Concatenates every entry (buffers included) in canonical order.
std::vector<double> flatten(const ParamSet& p);
/// Inverse of flatten against a template with the same layout.
/// Throws std::invalid_argument on length mismatch.
ParamSet unflatten(std::span<const double> v, const ParamSet& templ);

std::vector<double> flatten(const ContentModel& m);
ContentModel unflatten(std::span<const double> v, const ContentModel& templ);

/// Concatenation of trainable entries only; used by proximal regularizers.
std::vector<double> flatten_trainable(const ParamSet& p);

/// Sum over trainable entries of ||a - b||^2, recorded on the tape with `a`
/// as leaves (gradient flows into a) and `b` as constants.
Var squared_distance(Tape& tape, ParamSet& a, const ParamSet& b);

}  // namespace fedstyle::nn
