#pragma once

#include "fedstyle/ad/tensor.hpp"

#include <functional>
#include <span>
#include <vector>

namespace fedstyle::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t numel() const { return value().numel(); }
    bool requires_grad() const;
    /// Gradient accumulated for this node by Tape::backward; empty if none reached it.
    std::span<const double> grad() const;

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records operations in execution order so that one reverse sweep
/// propagates gradients from a scalar loss to every reachable leaf.
///
/// Leaves created with leaf() are bound to an external Tensor; backward()
/// accumulates into that tensor's grad buffer when it requires grad.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Records `t` as an input. Gradients flow back into `t` iff t.requires_grad().
    Var leaf(Tensor& t);
    /// Records a value that never receives gradient.
    Var constant(Tensor t);

    /// Appends an op output. Throws NumericError when `value` holds NaN/Inf.
    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op);

    /// Reverse sweep from a single-element loss. One call per tape.
    void backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of a node, zero-allocated on first access.
    std::span<double> grad_buffer(std::size_t id);
    std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor* sink = nullptr;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        std::vector<double> grad;
        const char* op = "leaf";
    };

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }
inline std::span<const double> Var::grad() const { return tape_->grad(id_); }

}  // namespace fedstyle::ad
