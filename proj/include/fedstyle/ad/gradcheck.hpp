#pragma once

#include "fedstyle/ad/tape.hpp"

#include <functional>
#include <span>
#include <vector>

namespace fedstyle::ad {

/// Builds a scalar graph from leaves bound to the supplied inputs.
using ScalarGraph = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
    /// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8), norms
    /// taken jointly over every input element.
    double relative_error = 0.0;
    double analytic_norm = 0.0;
};

/// Compares reverse-mode gradients of `graph` against central finite
/// differences with step `h`, perturbing every element of every input.
GradCheckResult check_gradients(const ScalarGraph& graph, std::vector<Tensor> inputs, double h = 1e-5);

}  // namespace fedstyle::ad
