#pragma once

#include "ecgseg/layers.h"
#include "ecgseg/tensor.h"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ecgseg {

struct ModelConfig {
    std::array<std::size_t, 4> encoder_widths{16, 32, 64, 128};
    std::size_t bottleneck_width = 256;
    std::size_t n_classes = 4;
    std::size_t conv_kernel = 9;
    std::size_t conv_padding = 4;
    std::size_t deconv_kernel = 8;
    std::size_t deconv_stride = 2;
    std::size_t deconv_padding = 3;
    std::size_t final_kernel = 1;
    std::uint64_t seed = 1;

    static ModelConfig tiny();

    // Throws std::invalid_argument unless convolutions preserve length and
    // deconvolutions exactly double it.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Input length multiple required by the four pooling stages.
inline constexpr std::size_t kLengthQuantum = 16;

struct NamedBuffer {
    std::string name;
    std::vector<double>* values;
};

// Fully convolutional 1-D encoder/decoder: four conv-bn-relu x2 stages with
// max pooling, a bottleneck stage, four transposed-conv upsampling stages
// joined with the mirrored encoder outputs, and a 1x1 class head.
class UNet {
public:
    explicit UNet(const ModelConfig& config = {});

    const ModelConfig& config() const { return config_; }

    // (B, 1, l) -> (B, 4, l) class scores using running batch-norm statistics.
    Tensor predict(const Tensor& x) const;

    // Training-mode forward: batch statistics, running stats updated,
    // activations cached for backward().
    Tensor forward_train(const Tensor& x);
    // Accumulates parameter gradients for the last forward_train().
    void backward(const Tensor& dscores);

    void zero_grad();
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::vector<NamedBuffer> buffers();
    std::size_t parameter_count() const;

    // Optimizer steps taken so far; saved with checkpoints.
    std::uint64_t training_step = 0;

    struct ConvUnit {
        Parameter weight;
        Parameter bias;
        nn::BatchNormState bn;
    };
    struct ConvBlock {
        ConvUnit first;
        ConvUnit second;
    };
    struct UpUnit {
        Parameter weight;
        Parameter bias;
    };

private:
    struct UnitCache {
        Tensor input;
        nn::BatchNormCache bn;
        Tensor pre_activation;
    };
    struct BlockCache {
        UnitCache first;
        UnitCache second;
    };
    struct Cache {
        std::size_t input_length = 0;
        std::array<BlockCache, 4> enc;
        std::array<std::vector<std::size_t>, 4> pool_argmax;
        std::array<std::size_t, 4> pool_input_length{};
        BlockCache bottleneck;
        std::array<Tensor, 4> up_input;
        std::array<std::size_t, 4> up_length{};
        std::array<BlockCache, 4> dec;
        Tensor head_input;
        bool valid = false;
    };

    Tensor unit_infer(const ConvUnit& u, const Tensor& x) const;
    Tensor block_infer(const ConvBlock& b, const Tensor& x) const;
    Tensor unit_train(ConvUnit& u, const Tensor& x, UnitCache& cache);
    Tensor block_train(ConvBlock& b, const Tensor& x, BlockCache& cache);
    Tensor unit_backward(ConvUnit& u, const UnitCache& cache, const Tensor& dy);
    Tensor block_backward(ConvBlock& b, const BlockCache& cache, const Tensor& dy);

    ModelConfig config_;
    std::array<ConvBlock, 4> enc_;
    ConvBlock bottleneck_;
    std::array<UpUnit, 4> up_;  // up_[i] feeds dec_[i]; index 0 is the shallowest level
    std::array<ConvBlock, 4> dec_;
    Parameter head_weight_;
    Parameter head_bias_;
    Cache cache_;
};

} // namespace ecgseg
