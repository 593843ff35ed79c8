#pragma once

#include "fedstyle/ad/tensor.hpp"

#include <string>
#include <vector>

namespace fedstyle::ad {

/// One named tensor of a network. Buffers (trainable == false) such as
/// batch-norm running statistics travel with the parameters for
/// checkpointing and aggregation but are never touched by the optimizer.
struct NamedTensor {
    std::string name;
    Tensor tensor;
    bool trainable = true;
};

/// Ordered, named collection of tensors for one network.
class ParamSet {
public:
    ParamSet() = default;
    explicit ParamSet(std::string tag) : tag_(std::move(tag)) {}

    const std::string& tag() const { return tag_; }
    void set_tag(std::string tag) { tag_ = std::move(tag); }

    Tensor& add(std::string name, Tensor t, bool trainable = true);

    bool contains(std::string_view name) const;
    Tensor& get(std::string_view name);
    const Tensor& get(std::string_view name) const;

    std::vector<NamedTensor>& entries() { return entries_; }
    const std::vector<NamedTensor>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Total element count over all entries, buffers included.
    std::size_t numel() const;

    void clear_grads();

    friend bool operator==(const ParamSet& a, const ParamSet& b);

private:
    std::string tag_;
    std::vector<NamedTensor> entries_;
};

/// Plain gradient descent: p <- p - lr * grad(p) for every trainable tensor,
/// then clears the gradients. Throws std::logic_error if a trainable tensor
/// has no gradient.
void sgd_step(ParamSet& params, double lr);

}  // namespace fedstyle::ad
