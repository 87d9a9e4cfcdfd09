#pragma once

#include "ecgseg/tensor.h"
#include "ecgseg/waves.h"

#include <cstddef>
#include <span>
#include <vector>

// Forward and backward passes of the layers the segmentation network is
// built from. Backward functions accumulate parameter gradients (+=) and
// return (or overwrite) input gradients.
namespace ecgseg::nn {

// Stride-1 cross-correlation. weight (out, in, k), bias (1, 1, out).
// Output length = length + 2*padding - k + 1.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t padding);
Tensor conv1d_backward(const Tensor& x, const Tensor& weight, std::size_t padding, const Tensor& dy,
                       Tensor& dweight, Tensor& dbias);

Tensor relu(const Tensor& x);
// Gradient is zero where x <= 0.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

struct BatchNormState {
    Parameter gamma;  // (1, 1, C)
    Parameter beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;
    bool training = true;

    BatchNormState() = default;
    BatchNormState(const std::string& name, std::size_t channels);
};

struct BatchNormCache {
    Tensor normalized;
    std::vector<double> inv_std;
};

// Training mode normalizes with per-channel statistics over (batch, length)
// and updates the running averages; inference mode uses the running ones.
Tensor batchnorm1d(const Tensor& x, BatchNormState& state, BatchNormCache* cache = nullptr);
Tensor batchnorm1d_inference(const Tensor& x, const BatchNormState& state);
// Only valid after a training-mode forward that filled `cache`.
Tensor batchnorm1d_backward(const BatchNormCache& cache, BatchNormState& state, const Tensor& dy);

// Window 2, stride 2; a trailing odd sample is dropped.
struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // input position per output element
};
PoolResult maxpool1d(const Tensor& x);
Tensor maxpool1d_backward(const Tensor& dy, std::span<const std::size_t> argmax, std::size_t input_length);

// weight (in, out, k), bias (1, 1, out).
// Output length = (length - 1)*stride - 2*padding + k.
Tensor convtranspose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                       std::size_t padding);
Tensor convtranspose1d_backward(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t padding,
                                const Tensor& dy, Tensor& dweight, Tensor& dbias);

// Right-pads `up` with zeros to the skip length and stacks [skip, up] along
// channels.
Tensor zero_pad_concat(const Tensor& up, const Tensor& skip);
struct ConcatGrads {
    Tensor up;
    Tensor skip;
};
ConcatGrads zero_pad_concat_backward(const Tensor& dy, std::size_t up_channels, std::size_t up_length,
                                     std::size_t skip_channels);

Tensor pad_right(const Tensor& x, std::size_t length);
Tensor crop_right(const Tensor& x, std::size_t length);

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d logits
};

// Mean over all (item, position) of -log softmax(logits)[target].
// logits (B, 4, l); one mask of length l per item.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const SegmentationMask> targets);

} // namespace ecgseg::nn
