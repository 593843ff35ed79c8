#include "fedstyle/ad/param_set.hpp"

#include <algorithm>
#include <stdexcept>

namespace fedstyle::ad {

Tensor& ParamSet::add(std::string name, Tensor t, bool trainable) {
    if (contains(name)) throw std::invalid_argument("ParamSet: duplicate entry '" + name + "'");
    t.set_requires_grad(trainable);
    entries_.push_back({std::move(name), std::move(t), trainable});
    return entries_.back().tensor;
}

bool ParamSet::contains(std::string_view name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
}

Tensor& ParamSet::get(std::string_view name) {
    for (auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw std::out_of_range("ParamSet '" + tag_ + "': no entry '" + std::string(name) + "'");
}

const Tensor& ParamSet::get(std::string_view name) const {
    return const_cast<ParamSet*>(this)->get(name);
}

std::size_t ParamSet::numel() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
}

void ParamSet::clear_grads() {
    for (auto& e : entries_) e.tensor.clear_grad();
}

bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.tag_ != b.tag_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
        const auto& x = a.entries_[i];
        const auto& y = b.entries_[i];
        if (x.name != y.name || x.trainable != y.trainable || !(x.tensor == y.tensor)) return false;
    }
    return true;
}

void sgd_step(ParamSet& params, double lr) {
    if (!(lr >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be non-negative");
    for (auto& e : params.entries()) {
        if (!e.trainable) continue;
        if (!e.tensor.has_grad())
            throw std::logic_error("sgd_step: missing gradient for '" + e.name + "' in '" + params.tag() + "'");
    }
    for (auto& e : params.entries()) {
        if (!e.trainable) continue;
        auto p = e.tensor.data();
        const auto g = e.tensor.grad();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
        e.tensor.clear_grad();
    }
}

}  // namespace fedstyle::ad
