#include "fedstyle/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace fedstyle::ad {

namespace {

double evaluate(const ScalarGraph& graph, std::vector<Tensor>& inputs, bool with_grad) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (auto& t : inputs) {
        t.set_requires_grad(with_grad);
        vars.push_back(tape.leaf(t));
    }
    Var out = graph(tape, vars);
    if (with_grad) tape.backward(out);
    return out.value().item();
}

}  // namespace

GradCheckResult check_gradients(const ScalarGraph& graph, std::vector<Tensor> inputs, double h) {
    for (auto& t : inputs) t.clear_grad();
    evaluate(graph, inputs, true);

    double diff2 = 0.0, an2 = 0.0, num2 = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const std::vector<double> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
        inputs[k].clear_grad();
        for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
            const double x0 = inputs[k][i];
            inputs[k][i] = x0 + h;
            const double fp = evaluate(graph, inputs, false);
            inputs[k][i] = x0 - h;
            const double fm = evaluate(graph, inputs, false);
            inputs[k][i] = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
            an2 += analytic[i] * analytic[i];
            num2 += numeric * numeric;
        }
    }
    GradCheckResult r;
    r.analytic_norm = std::sqrt(an2);
    r.relative_error = std::sqrt(diff2) / std::max({std::sqrt(an2), std::sqrt(num2), 1e-8});
    return r;
}

}  // namespace fedstyle::ad
