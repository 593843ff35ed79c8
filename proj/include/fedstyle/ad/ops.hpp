#pragma once

#include "fedstyle/ad/tape.hpp"

#include <optional>
#include <span>

namespace fedstyle::ad {

// Differentiable operators. Every op checks shapes (ShapeError) and the
// finiteness of its output (NumericError) and registers its backward rule
// on the tape of its inputs.

/// [M x K] . [K x N] -> [M x N]
Var matmul(Var a, Var b);
Var transpose(Var a);

/// Elementwise for equal shapes; a [R x C] with b [C] broadcasts b over rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product, equal shapes only.
Var mul(Var a, Var b);
Var mul_scalar(Var a, double c);
Var add_scalar(Var a, double c);

Var relu(Var a);
Var exp(Var a);
/// Natural log; inputs must be strictly positive.
Var log(Var a);

/// Concatenate rank-2 tensors along axis 0 (rows) or 1 (columns), or rank-1 along 0.
Var concat(Var a, Var b, std::size_t axis);

/// Sum of all elements -> shape {1}.
Var sum(Var a);
/// Rank-2 reduction: axis 0 -> {C}, axis 1 -> {R}. Rank-1 with axis 0 -> {1}.
Var sum(Var a, std::size_t axis);
Var mean(Var a);
Var mean(Var a, std::size_t axis);

/// Same value, no gradient flow (stop-gradient).
Var detach(Var a);

inline constexpr double kNormalizeEps = 1e-12;

/// Unit-norm rows (rank 2, axis 1) or unit-norm vector (rank 1, axis 0).
/// A slice whose norm is below eps maps to zeros and passes zero gradient.
Var l2_normalize(Var a, std::size_t axis = 1, double eps = kNormalizeEps);

/// Row-wise cosine similarity of two [B x D] tensors -> {B}.
Var cosine_sim(Var a, Var b);

/// Row-wise log(sum_j mask_ij * exp(a_ij)) for rank-2 `a`, computed with the
/// max-shift trick. `keep` has a's shape with entries in {0, 1}; every row
/// must keep at least one entry.
Var masked_logsumexp(Var a, const Tensor& keep);

/// Mean softmax cross entropy of [N x K] logits against integer labels -> {1}.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

struct BatchNormOptions {
    double eps = 1e-5;
    /// running <- momentum * running + (1 - momentum) * batch
    double momentum = 0.9;
    bool training = true;
};

/// Batch normalization over rows of x [B x D] with affine gamma/beta [D].
/// Training mode normalizes by batch statistics and, when given, updates the
/// running buffers (unbiased variance); eval mode normalizes by the buffers.
Var batchnorm1d(Var x, Var gamma, Var beta, const BatchNormOptions& opts,
                Tensor* running_mean = nullptr, Tensor* running_var = nullptr);

}  // namespace fedstyle::ad
