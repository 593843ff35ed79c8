#include "fedstyle/ad/tape.hpp"

#include <cmath>
#include <string>

namespace fedstyle::ad {

Var Tape::leaf(Tensor& t) {
    if (!t.all_finite()) throw NumericError("leaf holds a non-finite value");
    Node n;
    n.value = Tensor(t.shape(), t.values());
    n.requires_grad = t.requires_grad();
    n.sink = t.requires_grad() ? &t : nullptr;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor t) {
    if (!t.all_finite()) throw NumericError("constant holds a non-finite value");
    Node n;
    n.value = std::move(t);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
    if (!value.all_finite())
        throw NumericError(std::string(op) + ": non-finite value in output of shape " +
                           shape_str(value.shape()));
    Node n;
    n.value = std::move(value);
    n.op = op;
    for (const Var& v : inputs) {
        if (v.tape_ != this) throw std::invalid_argument(std::string(op) + ": input from another tape");
        n.inputs.push_back(v.id_);
        n.requires_grad = n.requires_grad || nodes_[v.id_].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape_ != this) throw std::invalid_argument("backward: loss recorded on another tape");
    if (loss.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (backward_done_) throw std::logic_error("backward: tape already swept");
    backward_done_ = true;

    grad_buffer(loss.id_)[0] = 1.0;
    for (std::size_t id = loss.id_ + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        for (double g : n.grad)
            if (!std::isfinite(g)) throw NumericError(std::string(n.op) + ": non-finite gradient");
        n.backward(*this, id);
    }
    for (Node& n : nodes_) {
        if (!n.sink) continue;
        if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
        n.sink->accumulate_grad(n.grad);
    }
}

}  // namespace fedstyle::ad
