#include "ecgseg/tensor.h"

#include "ecgseg/errors.h"

#include <algorithm>
#include <stdexcept>

namespace ecgseg {

Tensor::Tensor(std::size_t batch, std::size_t channels, std::size_t length, double fill)
    : batch_(batch), channels_(channels), length_(length), data_(batch * channels * length, fill) {
    if (batch == 0 || channels == 0 || length == 0) {
        throw ShapeError("tensor dimensions must be >= 1, got " + shape_string());
    }
}

std::string Tensor::shape_string() const {
    return "(" + std::to_string(batch_) + ", " + std::to_string(channels_) + ", " + std::to_string(length_) + ")";
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.batch(), value.channels(), value.length()) {}

} // namespace ecgseg
