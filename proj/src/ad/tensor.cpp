#include "fedstyle/ad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedstyle::ad {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t d : shape)
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape(shape_);
    if (shape_numel(shape_) != data_.size())
        throw ShapeError("shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

void Tensor::accumulate_grad(std::span<const double> g) {
    if (g.size() != data_.size()) throw ShapeError("gradient size mismatch");
    if (grad_.empty()) grad_.assign(data_.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += g[i];
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

void Tensor::reshape(Shape shape) {
    validate_shape(shape);
    if (shape_numel(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace fedstyle::ad
