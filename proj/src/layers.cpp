#include "ecgseg/layers.h"

#include "ecgseg/errors.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ecgseg::nn {

namespace {

void require_bias(const Tensor& bias, std::size_t n, const char* op) {
    if (bias.size() != n) {
        throw ShapeError(std::string(op) + ": bias has " + std::to_string(bias.size()) + " values, expected " +
                         std::to_string(n));
    }
}

// Valid output range [lo, hi) for tap k of a stride-1 correlation.
inline void tap_range(std::size_t k, std::size_t padding, std::size_t in_len, std::size_t out_len,
                      std::size_t& lo, std::size_t& hi) {
    // input index = t + k - padding must lie in [0, in_len)
    lo = padding > k ? padding - k : 0;
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(in_len) + static_cast<std::ptrdiff_t>(padding) -
                             static_cast<std::ptrdiff_t>(k);
    hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(h, 0, static_cast<std::ptrdiff_t>(out_len)));
    if (lo > hi) {
        lo = hi;
    }
}

} // namespace

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t padding) {
    const std::size_t out_c = weight.batch();
    const std::size_t in_c = weight.channels();
    const std::size_t k = weight.length();
    if (x.channels() != in_c) {
        throw ShapeError("conv1d: input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                         std::to_string(in_c));
    }
    require_bias(bias, out_c, "conv1d");
    const std::ptrdiff_t out_len = static_cast<std::ptrdiff_t>(x.length() + 2 * padding) -
                                   static_cast<std::ptrdiff_t>(k) + 1;
    if (out_len < 1) {
        throw ShapeError("conv1d: kernel longer than padded input");
    }
    const std::size_t len = x.length();
    Tensor y(x.batch(), out_c, static_cast<std::size_t>(out_len));
    const auto b = bias.values();
    for (std::size_t n = 0; n < x.batch(); ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            double* yr = y.row(n, o);
            std::fill(yr, yr + out_len, b[o]);
            for (std::size_t c = 0; c < in_c; ++c) {
                const double* xr = x.row(n, c);
                const double* wr = weight.row(o, c);
                for (std::size_t j = 0; j < k; ++j) {
                    std::size_t lo, hi;
                    tap_range(j, padding, len, static_cast<std::size_t>(out_len), lo, hi);
                    if (lo == hi) {
                        continue;
                    }
                    const double w = wr[j];
                    const double* xs = xr + (lo + j - padding);  // x[t + j - padding] at t = lo
                    double* ys = yr + lo;
                    const std::size_t cnt = hi - lo;
                    for (std::size_t t = 0; t < cnt; ++t) {
                        ys[t] += w * xs[t];
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv1d_backward(const Tensor& x, const Tensor& weight, std::size_t padding, const Tensor& dy,
                       Tensor& dweight, Tensor& dbias) {
    const std::size_t out_c = weight.batch();
    const std::size_t in_c = weight.channels();
    const std::size_t k = weight.length();
    const std::size_t len = x.length();
    const std::size_t out_len = dy.length();
    if (dy.channels() != out_c || dy.batch() != x.batch() || !dweight.same_shape(weight) || dbias.size() != out_c) {
        throw ShapeError("conv1d_backward: shape mismatch");
    }
    Tensor dx(x.batch(), in_c, len);
    auto db = dbias.values();
    for (std::size_t n = 0; n < x.batch(); ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            const double* g = dy.row(n, o);
            double s = 0.0;
            for (std::size_t t = 0; t < out_len; ++t) {
                s += g[t];
            }
            db[o] += s;
            for (std::size_t c = 0; c < in_c; ++c) {
                const double* xr = x.row(n, c);
                double* dxr = dx.row(n, c);
                const double* wr = weight.row(o, c);
                double* dwr = dweight.row(o, c);
                for (std::size_t j = 0; j < k; ++j) {
                    std::size_t lo, hi;
                    tap_range(j, padding, len, out_len, lo, hi);
                    if (lo == hi) {
                        continue;
                    }
                    const double w = wr[j];
                    const std::size_t cnt = hi - lo;
                    const double* xs = xr + (lo + j - padding);
                    double* dxs = dxr + (lo + j - padding);
                    const double* gs = g + lo;
                    double acc0 = 0.0, acc1 = 0.0;
                    std::size_t t = 0;
                    for (; t + 1 < cnt; t += 2) {
                        acc0 += gs[t] * xs[t];
                        acc1 += gs[t + 1] * xs[t + 1];
                    }
                    if (t < cnt) {
                        acc0 += gs[t] * xs[t];
                    }
                    dwr[j] += acc0 + acc1;
                    for (t = 0; t < cnt; ++t) {
                        dxs[t] += w * gs[t];
                    }
                }
            }
        }
    }
    return dx;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.values()) {
        v = v < 0.0 ? 0.0 : v;  // NaN passes through so divergence stays visible
    }
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    if (!x.same_shape(dy)) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    Tensor dx = dy;
    const auto xv = x.values();
    auto d = dx.values();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(xv[i] > 0.0)) {
            d[i] = 0.0;
        }
    }
    return dx;
}

BatchNormState::BatchNormState(const std::string& name, std::size_t channels)
    : gamma(name + ".gamma", Tensor(1, 1, channels, 1.0)),
      beta(name + ".beta", Tensor(1, 1, channels, 0.0)),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {}

Tensor batchnorm1d_inference(const Tensor& x, const BatchNormState& state) {
    const std::size_t ch = x.channels();
    if (state.running_mean.size() != ch || state.gamma.value.size() != ch) {
        throw ShapeError("batchnorm1d: channel mismatch");
    }
    Tensor y(x.batch(), ch, x.length());
    const auto g = state.gamma.value.values();
    const auto b = state.beta.value.values();
    for (std::size_t c = 0; c < ch; ++c) {
        const double scale = g[c] / std::sqrt(state.running_var[c] + state.epsilon);
        const double shift = b[c] - scale * state.running_mean[c];
        for (std::size_t n = 0; n < x.batch(); ++n) {
            const double* xr = x.row(n, c);
            double* yr = y.row(n, c);
            for (std::size_t t = 0; t < x.length(); ++t) {
                yr[t] = scale * xr[t] + shift;
            }
        }
    }
    return y;
}

Tensor batchnorm1d(const Tensor& x, BatchNormState& state, BatchNormCache* cache) {
    if (!state.training) {
        return batchnorm1d_inference(x, state);
    }
    const std::size_t ch = x.channels();
    if (state.running_mean.size() != ch || state.gamma.value.size() != ch) {
        throw ShapeError("batchnorm1d: channel mismatch");
    }
    const std::size_t len = x.length();
    const double count = static_cast<double>(x.batch() * len);
    Tensor y(x.batch(), ch, len);
    Tensor normalized(x.batch(), ch, len);
    std::vector<double> inv_std(ch);
    const auto g = state.gamma.value.values();
    const auto b = state.beta.value.values();
    for (std::size_t c = 0; c < ch; ++c) {
        double sum = 0.0;
        for (std::size_t n = 0; n < x.batch(); ++n) {
            const double* xr = x.row(n, c);
            for (std::size_t t = 0; t < len; ++t) {
                sum += xr[t];
            }
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t n = 0; n < x.batch(); ++n) {
            const double* xr = x.row(n, c);
            for (std::size_t t = 0; t < len; ++t) {
                const double d = xr[t] - mean;
                sq += d * d;
            }
        }
        const double var = sq / count;
        inv_std[c] = 1.0 / std::sqrt(var + state.epsilon);
        for (std::size_t n = 0; n < x.batch(); ++n) {
            const double* xr = x.row(n, c);
            double* nr = normalized.row(n, c);
            double* yr = y.row(n, c);
            for (std::size_t t = 0; t < len; ++t) {
                nr[t] = (xr[t] - mean) * inv_std[c];
                yr[t] = g[c] * nr[t] + b[c];
            }
        }
        state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean;
        state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * var;
    }
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Tensor batchnorm1d_backward(const BatchNormCache& cache, BatchNormState& state, const Tensor& dy) {
    const Tensor& xn = cache.normalized;
    if (!xn.same_shape(dy)) {
        throw ShapeError("batchnorm1d_backward: shape mismatch");
    }
    const std::size_t ch = dy.channels();
    const std::size_t len = dy.length();
    const double count = static_cast<double>(dy.batch() * len);
    Tensor dx(dy.batch(), ch, len);
    const auto g = state.gamma.value.values();
    auto dg = state.gamma.grad.values();
    auto dbeta = state.beta.grad.values();
    for (std::size_t c = 0; c < ch; ++c) {
        double sum_dy = 0.0;
        double sum_dy_xn = 0.0;
        for (std::size_t n = 0; n < dy.batch(); ++n) {
            const double* gr = dy.row(n, c);
            const double* nr = xn.row(n, c);
            for (std::size_t t = 0; t < len; ++t) {
                sum_dy += gr[t];
                sum_dy_xn += gr[t] * nr[t];
            }
        }
        dg[c] += sum_dy_xn;
        dbeta[c] += sum_dy;
        const double k = g[c] * cache.inv_std[c] / count;
        for (std::size_t n = 0; n < dy.batch(); ++n) {
            const double* gr = dy.row(n, c);
            const double* nr = xn.row(n, c);
            double* dr = dx.row(n, c);
            for (std::size_t t = 0; t < len; ++t) {
                dr[t] = k * (count * gr[t] - sum_dy - nr[t] * sum_dy_xn);
            }
        }
    }
    return dx;
}

PoolResult maxpool1d(const Tensor& x) {
    const std::size_t out_len = x.length() / 2;
    if (out_len == 0) {
        throw ShapeError("maxpool1d: input length " + std::to_string(x.length()) + " is shorter than the window");
    }
    PoolResult r{Tensor(x.batch(), x.channels(), out_len), std::vector<std::size_t>(x.batch() * x.channels() * out_len)};
    std::size_t idx = 0;
    for (std::size_t n = 0; n < x.batch(); ++n) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
            const double* xr = x.row(n, c);
            double* yr = r.output.row(n, c);
            for (std::size_t t = 0; t < out_len; ++t, ++idx) {
                const std::size_t i = 2 * t;
                const std::size_t a = xr[i + 1] > xr[i] ? i + 1 : i;
                yr[t] = xr[a];
                r.argmax[idx] = a;
            }
        }
    }
    return r;
}

Tensor maxpool1d_backward(const Tensor& dy, std::span<const std::size_t> argmax, std::size_t input_length) {
    if (argmax.size() != dy.size()) {
        throw ShapeError("maxpool1d_backward: argmax size mismatch");
    }
    Tensor dx(dy.batch(), dy.channels(), input_length);
    std::size_t idx = 0;
    for (std::size_t n = 0; n < dy.batch(); ++n) {
        for (std::size_t c = 0; c < dy.channels(); ++c) {
            const double* g = dy.row(n, c);
            double* dr = dx.row(n, c);
            for (std::size_t t = 0; t < dy.length(); ++t, ++idx) {
                dr[argmax[idx]] += g[t];
            }
        }
    }
    return dx;
}

Tensor convtranspose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                       std::size_t padding) {
    const std::size_t in_c = weight.batch();
    const std::size_t out_c = weight.channels();
    const std::size_t k = weight.length();
    if (x.channels() != in_c) {
        throw ShapeError("convtranspose1d: input has " + std::to_string(x.channels()) +
                         " channels, kernel expects " + std::to_string(in_c));
    }
    require_bias(bias, out_c, "convtranspose1d");
    if (stride == 0) {
        throw std::invalid_argument("convtranspose1d: stride must be >= 1");
    }
    const std::ptrdiff_t out_len = static_cast<std::ptrdiff_t>((x.length() - 1) * stride + k) -
                                   static_cast<std::ptrdiff_t>(2 * padding);
    if (out_len < 1) {
        throw ShapeError("convtranspose1d: non-positive output length");
    }
    const auto len_out = static_cast<std::size_t>(out_len);
    Tensor y(x.batch(), out_c, len_out);
    const auto b = bias.values();
    for (std::size_t n = 0; n < x.batch(); ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            double* yr = y.row(n, o);
            std::fill(yr, yr + len_out, b[o]);
        }
        for (std::size_t c = 0; c < in_c; ++c) {
            const double* xr = x.row(n, c);
            for (std::size_t o = 0; o < out_c; ++o) {
                double* yr = y.row(n, o);
                const double* wr = weight.row(c, o);
                for (std::size_t i = 0; i < x.length(); ++i) {
                    const double xv = xr[i];
                    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(i * stride) -
                                                static_cast<std::ptrdiff_t>(padding);
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::ptrdiff_t t = base + static_cast<std::ptrdiff_t>(j);
                        if (t >= 0 && t < out_len) {
                            yr[t] += xv * wr[j];
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor convtranspose1d_backward(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t padding,
                                const Tensor& dy, Tensor& dweight, Tensor& dbias) {
    const std::size_t in_c = weight.batch();
    const std::size_t out_c = weight.channels();
    const std::size_t k = weight.length();
    if (dy.channels() != out_c || dy.batch() != x.batch() || !dweight.same_shape(weight) || dbias.size() != out_c) {
        throw ShapeError("convtranspose1d_backward: shape mismatch");
    }
    const auto out_len = static_cast<std::ptrdiff_t>(dy.length());
    Tensor dx(x.batch(), in_c, x.length());
    auto db = dbias.values();
    for (std::size_t n = 0; n < x.batch(); ++n) {
        for (std::size_t o = 0; o < out_c; ++o) {
            const double* g = dy.row(n, o);
            double s = 0.0;
            for (std::ptrdiff_t t = 0; t < out_len; ++t) {
                s += g[t];
            }
            db[o] += s;
        }
        for (std::size_t c = 0; c < in_c; ++c) {
            const double* xr = x.row(n, c);
            double* dxr = dx.row(n, c);
            for (std::size_t o = 0; o < out_c; ++o) {
                const double* g = dy.row(n, o);
                const double* wr = weight.row(c, o);
                double* dwr = dweight.row(c, o);
                for (std::size_t i = 0; i < x.length(); ++i) {
                    const double xv = xr[i];
                    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(i * stride) -
                                                static_cast<std::ptrdiff_t>(padding);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::ptrdiff_t t = base + static_cast<std::ptrdiff_t>(j);
                        if (t >= 0 && t < out_len) {
                            acc += wr[j] * g[t];
                            dwr[j] += xv * g[t];
                        }
                    }
                    dxr[i] += acc;
                }
            }
        }
    }
    return dx;
}

Tensor zero_pad_concat(const Tensor& up, const Tensor& skip) {
    if (up.batch() != skip.batch()) {
        throw ShapeError("zero_pad_concat: batch mismatch");
    }
    if (up.length() > skip.length()) {
        throw ShapeError("zero_pad_concat: upsampled length " + std::to_string(up.length()) +
                         " exceeds skip length " + std::to_string(skip.length()));
    }
    const std::size_t len = skip.length();
    Tensor y(skip.batch(), skip.channels() + up.channels(), len);
    for (std::size_t n = 0; n < skip.batch(); ++n) {
        for (std::size_t c = 0; c < skip.channels(); ++c) {
            std::copy_n(skip.row(n, c), len, y.row(n, c));
        }
        for (std::size_t c = 0; c < up.channels(); ++c) {
            std::copy_n(up.row(n, c), up.length(), y.row(n, skip.channels() + c));
        }
    }
    return y;
}

ConcatGrads zero_pad_concat_backward(const Tensor& dy, std::size_t up_channels, std::size_t up_length,
                                     std::size_t skip_channels) {
    if (dy.channels() != up_channels + skip_channels || up_length > dy.length()) {
        throw ShapeError("zero_pad_concat_backward: shape mismatch");
    }
    ConcatGrads g{Tensor(dy.batch(), up_channels, up_length), Tensor(dy.batch(), skip_channels, dy.length())};
    for (std::size_t n = 0; n < dy.batch(); ++n) {
        for (std::size_t c = 0; c < skip_channels; ++c) {
            std::copy_n(dy.row(n, c), dy.length(), g.skip.row(n, c));
        }
        for (std::size_t c = 0; c < up_channels; ++c) {
            std::copy_n(dy.row(n, skip_channels + c), up_length, g.up.row(n, c));
        }
    }
    return g;
}

Tensor pad_right(const Tensor& x, std::size_t length) {
    if (length < x.length()) {
        throw ShapeError("pad_right: target shorter than input");
    }
    Tensor y(x.batch(), x.channels(), length);
    for (std::size_t n = 0; n < x.batch(); ++n) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
            std::copy_n(x.row(n, c), x.length(), y.row(n, c));
        }
    }
    return y;
}

Tensor crop_right(const Tensor& x, std::size_t length) {
    if (length > x.length()) {
        throw ShapeError("crop_right: target longer than input");
    }
    Tensor y(x.batch(), x.channels(), length);
    for (std::size_t n = 0; n < x.batch(); ++n) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
            std::copy_n(x.row(n, c), length, y.row(n, c));
        }
    }
    return y;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const SegmentationMask> targets) {
    if (logits.channels() != kNumClasses) {
        throw ShapeError("softmax_cross_entropy: expected 4 class rows");
    }
    if (targets.size() != logits.batch()) {
        throw ShapeError("softmax_cross_entropy: one target mask per batch item required");
    }
    const std::size_t len = logits.length();
    const double count = static_cast<double>(logits.batch() * len);
    LossResult r{0.0, Tensor(logits.batch(), kNumClasses, len)};
    double total = 0.0;
    for (std::size_t n = 0; n < logits.batch(); ++n) {
        const auto& mask = targets[n];
        if (mask.size() != len) {
            throw ShapeError("softmax_cross_entropy: target length " + std::to_string(mask.size()) +
                             " differs from logits length " + std::to_string(len));
        }
        for (std::size_t t = 0; t < len; ++t) {
            const auto label = static_cast<std::size_t>(mask[t]);
            if (label >= kNumClasses) {
                throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                            " outside 0..3");
            }
            double z[kNumClasses];
            double mx = -INFINITY;
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                z[c] = logits(n, c, t);
                mx = std::max(mx, z[c]);
            }
            double sum = 0.0;
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                z[c] = std::exp(z[c] - mx);
                sum += z[c];
            }
            total += std::log(sum) - (logits(n, label, t) - mx);
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                r.grad(n, c, t) = (z[c] / sum - (c == label ? 1.0 : 0.0)) / count;
            }
        }
    }
    r.loss = total / count;
    return r;
}

} // namespace ecgseg::nn
