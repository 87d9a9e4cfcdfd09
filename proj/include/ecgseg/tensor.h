#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ecgseg {

// Dense (batch, channels, length) array in row-major order. Weights reuse
// the same layout: conv kernels are (out, in, k), transposed-conv kernels
// (in, out, k), biases (1, 1, n).
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t batch, std::size_t channels, std::size_t length, double fill = 0.0);

    std::size_t batch() const { return batch_; }
    std::size_t channels() const { return channels_; }
    std::size_t length() const { return length_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool same_shape(const Tensor& other) const {
        return batch_ == other.batch_ && channels_ == other.channels_ && length_ == other.length_;
    }
    std::string shape_string() const;

    double& operator()(std::size_t b, std::size_t c, std::size_t t) { return data_[index(b, c, t)]; }
    double operator()(std::size_t b, std::size_t c, std::size_t t) const { return data_[index(b, c, t)]; }

    double* row(std::size_t b, std::size_t c) { return data_.data() + index(b, c, 0); }
    const double* row(std::size_t b, std::size_t c) const { return data_.data() + index(b, c, 0); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double v);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t index(std::size_t b, std::size_t c, std::size_t t) const { return (b * channels_ + c) * length_ + t; }

    std::size_t batch_ = 0;
    std::size_t channels_ = 0;
    std::size_t length_ = 0;
    std::vector<double> data_;
};

// A learnable tensor, its gradient accumulator and its layer path.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string name, Tensor value);

    void zero_grad() { grad.fill(0.0); }
};

} // namespace ecgseg
