#include "ecgseg/unet.h"

#include "ecgseg/errors.h"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ecgseg {

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.encoder_widths = {4, 8, 16, 32};
    c.bottleneck_width = 64;
    return c;
}

void ModelConfig::validate() const {
    for (const auto w : encoder_widths) {
        if (w == 0) {
            throw std::invalid_argument("model: channel widths must be >= 1");
        }
    }
    if (bottleneck_width == 0) {
        throw std::invalid_argument("model: bottleneck width must be >= 1");
    }
    if (n_classes != 4) {
        throw std::invalid_argument("model: exactly 4 output classes are supported");
    }
    if (conv_kernel != 2 * conv_padding + 1) {
        throw std::invalid_argument("model: conv kernel must equal 2*padding + 1 to preserve length");
    }
    if (deconv_stride != 2 || deconv_kernel != 2 * deconv_padding + deconv_stride) {
        throw std::invalid_argument("model: deconv must have stride 2 and kernel = 2*padding + 2");
    }
    if (final_kernel != 1) {
        throw std::invalid_argument("model: the class head uses kernel size 1");
    }
}

namespace {

Parameter init_param(const std::string& name, std::size_t d0, std::size_t d1, std::size_t d2, double fan_in,
                     std::mt19937_64& rng) {
    Tensor t(d0, d1, d2);
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.values()) {
        v = dist(rng);
    }
    return Parameter(name, std::move(t));
}

Parameter zero_param(const std::string& name, std::size_t n) { return Parameter(name, Tensor(1, 1, n)); }

UNet::ConvUnit make_unit(const std::string& prefix, int idx, std::size_t in, std::size_t out, std::size_t k,
                         std::mt19937_64& rng) {
    const std::string conv = prefix + ".conv" + std::to_string(idx);
    UNet::ConvUnit u;
    u.weight = init_param(conv + ".weight", out, in, k, static_cast<double>(in * k), rng);
    u.bias = zero_param(conv + ".bias", out);
    u.bn = nn::BatchNormState(prefix + ".bn" + std::to_string(idx), out);
    return u;
}

UNet::ConvBlock make_block(const std::string& prefix, std::size_t in, std::size_t out, std::size_t k,
                           std::mt19937_64& rng) {
    UNet::ConvBlock b;
    b.first = make_unit(prefix, 1, in, out, k, rng);
    b.second = make_unit(prefix, 2, out, out, k, rng);
    return b;
}

} // namespace

UNet::UNet(const ModelConfig& config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const auto& w = config_.encoder_widths;
    const std::size_t k = config_.conv_kernel;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t in = i == 0 ? 1 : w[i - 1];
        enc_[i] = make_block("enc" + std::to_string(i + 1), in, w[i], k, rng);
    }
    bottleneck_ = make_block("bottleneck", w[3], config_.bottleneck_width, k, rng);
    for (std::size_t i = 4; i-- > 0;) {
        const std::string prefix = "dec" + std::to_string(i + 1);
        const std::size_t in = i == 3 ? config_.bottleneck_width : w[i + 1];
        up_[i].weight = init_param(prefix + ".up.weight", in, w[i], config_.deconv_kernel,
                                   static_cast<double>(in * config_.deconv_kernel), rng);
        up_[i].bias = zero_param(prefix + ".up.bias", w[i]);
        dec_[i] = make_block(prefix, 2 * w[i], w[i], k, rng);
    }
    head_weight_ = init_param("head.weight", config_.n_classes, w[0], config_.final_kernel,
                              static_cast<double>(w[0] * config_.final_kernel), rng);
    head_bias_ = zero_param("head.bias", config_.n_classes);
}

Tensor UNet::unit_infer(const ConvUnit& u, const Tensor& x) const {
    return nn::relu(nn::batchnorm1d_inference(nn::conv1d(x, u.weight.value, u.bias.value, config_.conv_padding), u.bn));
}

Tensor UNet::block_infer(const ConvBlock& b, const Tensor& x) const {
    return unit_infer(b.second, unit_infer(b.first, x));
}

Tensor UNet::unit_train(ConvUnit& u, const Tensor& x, UnitCache& cache) {
    cache.input = x;
    const Tensor conv = nn::conv1d(x, u.weight.value, u.bias.value, config_.conv_padding);
    u.bn.training = true;
    cache.pre_activation = nn::batchnorm1d(conv, u.bn, &cache.bn);
    return nn::relu(cache.pre_activation);
}

Tensor UNet::block_train(ConvBlock& b, const Tensor& x, BlockCache& cache) {
    const Tensor mid = unit_train(b.first, x, cache.first);
    return unit_train(b.second, mid, cache.second);
}

Tensor UNet::unit_backward(ConvUnit& u, const UnitCache& cache, const Tensor& dy) {
    const Tensor d_bn = nn::relu_backward(cache.pre_activation, dy);
    const Tensor d_conv = nn::batchnorm1d_backward(cache.bn, u.bn, d_bn);
    return nn::conv1d_backward(cache.input, u.weight.value, config_.conv_padding, d_conv, u.weight.grad,
                               u.bias.grad);
}

Tensor UNet::block_backward(ConvBlock& b, const BlockCache& cache, const Tensor& dy) {
    return unit_backward(b.first, cache.first, unit_backward(b.second, cache.second, dy));
}

namespace {

std::size_t padded_length(std::size_t l) { return (l + kLengthQuantum - 1) / kLengthQuantum * kLengthQuantum; }

void require_input(const Tensor& x) {
    if (x.channels() != 1) {
        throw ShapeError("model input must have 1 channel, got " + x.shape_string());
    }
}

} // namespace

Tensor UNet::predict(const Tensor& x) const {
    require_input(x);
    const std::size_t l = x.length();
    Tensor h = nn::pad_right(x, padded_length(l));
    std::array<Tensor, 4> skips;
    for (std::size_t i = 0; i < 4; ++i) {
        skips[i] = block_infer(enc_[i], h);
        h = nn::maxpool1d(skips[i]).output;
    }
    h = block_infer(bottleneck_, h);
    for (std::size_t i = 4; i-- > 0;) {
        const Tensor up = nn::convtranspose1d(h, up_[i].weight.value, up_[i].bias.value, config_.deconv_stride,
                                              config_.deconv_padding);
        h = block_infer(dec_[i], nn::zero_pad_concat(up, skips[i]));
    }
    return nn::crop_right(nn::conv1d(h, head_weight_.value, head_bias_.value, 0), l);
}

Tensor UNet::forward_train(const Tensor& x) {
    require_input(x);
    Cache& c = cache_;
    c.valid = false;
    c.input_length = x.length();
    Tensor h = nn::pad_right(x, padded_length(x.length()));
    std::array<Tensor, 4> skips;
    for (std::size_t i = 0; i < 4; ++i) {
        skips[i] = block_train(enc_[i], h, c.enc[i]);
        auto pooled = nn::maxpool1d(skips[i]);
        c.pool_argmax[i] = std::move(pooled.argmax);
        c.pool_input_length[i] = skips[i].length();
        h = std::move(pooled.output);
    }
    h = block_train(bottleneck_, h, c.bottleneck);
    for (std::size_t i = 4; i-- > 0;) {
        c.up_input[i] = h;
        const Tensor up = nn::convtranspose1d(h, up_[i].weight.value, up_[i].bias.value, config_.deconv_stride,
                                              config_.deconv_padding);
        if (up.length() > skips[i].length()) {
            throw ShapeError("upsampled length exceeds skip length");
        }
        c.up_length[i] = up.length();
        h = block_train(dec_[i], nn::zero_pad_concat(up, skips[i]), c.dec[i]);
    }
    c.head_input = h;
    c.valid = true;
    return nn::crop_right(nn::conv1d(h, head_weight_.value, head_bias_.value, 0), x.length());
}

void UNet::backward(const Tensor& dscores) {
    Cache& c = cache_;
    if (!c.valid) {
        throw std::logic_error("UNet::backward without a preceding forward_train");
    }
    if (dscores.length() != c.input_length || dscores.channels() != config_.n_classes) {
        throw ShapeError("UNet::backward: gradient shape " + dscores.shape_string() + " does not match output");
    }
    Tensor g = nn::pad_right(dscores, c.head_input.length());
    g = nn::conv1d_backward(c.head_input, head_weight_.value, 0, g, head_weight_.grad, head_bias_.grad);
    std::array<Tensor, 4> skip_grads;
    for (std::size_t i = 0; i < 4; ++i) {
        const Tensor d_cat = block_backward(dec_[i], c.dec[i], g);
        auto parts = nn::zero_pad_concat_backward(d_cat, config_.encoder_widths[i], c.up_length[i],
                                                  config_.encoder_widths[i]);
        skip_grads[i] = std::move(parts.skip);
        g = nn::convtranspose1d_backward(c.up_input[i], up_[i].weight.value, config_.deconv_stride,
                                         config_.deconv_padding, parts.up, up_[i].weight.grad, up_[i].bias.grad);
    }
    g = block_backward(bottleneck_, c.bottleneck, g);
    for (std::size_t i = 4; i-- > 0;) {
        Tensor d_skip = nn::maxpool1d_backward(g, c.pool_argmax[i], c.pool_input_length[i]);
        auto sv = d_skip.values();
        const auto extra = skip_grads[i].values();
        for (std::size_t j = 0; j < sv.size(); ++j) {
            sv[j] += extra[j];
        }
        g = block_backward(enc_[i], c.enc[i], d_skip);
    }
}

void UNet::zero_grad() {
    for (Parameter* p : parameters()) {
        p->zero_grad();
    }
}

std::vector<Parameter*> UNet::parameters() {
    std::vector<Parameter*> out;
    auto add_unit = [&](ConvUnit& u) {
        out.insert(out.end(), {&u.weight, &u.bias, &u.bn.gamma, &u.bn.beta});
    };
    auto add_block = [&](ConvBlock& b) {
        add_unit(b.first);
        add_unit(b.second);
    };
    for (auto& b : enc_) {
        add_block(b);
    }
    add_block(bottleneck_);
    for (std::size_t i = 4; i-- > 0;) {
        out.push_back(&up_[i].weight);
        out.push_back(&up_[i].bias);
        add_block(dec_[i]);
    }
    out.push_back(&head_weight_);
    out.push_back(&head_bias_);
    return out;
}

std::vector<const Parameter*> UNet::parameters() const {
    auto mut = const_cast<UNet*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<NamedBuffer> UNet::buffers() {
    std::vector<NamedBuffer> out;
    auto add_unit = [&](ConvUnit& u) {
        const std::string base = u.bn.gamma.name.substr(0, u.bn.gamma.name.size() - std::string(".gamma").size());
        out.push_back({base + ".running_mean", &u.bn.running_mean});
        out.push_back({base + ".running_var", &u.bn.running_var});
    };
    auto add_block = [&](ConvBlock& b) {
        add_unit(b.first);
        add_unit(b.second);
    };
    for (auto& b : enc_) {
        add_block(b);
    }
    add_block(bottleneck_);
    for (std::size_t i = 4; i-- > 0;) {
        add_block(dec_[i]);
    }
    return out;
}

std::size_t UNet::parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) {
        n += p->value.size();
    }
    return n;
}

} // namespace ecgseg
