#pragma once

#include "ecgseg/tensor.h"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ecgseg::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One bias-corrected Adam update at step t >= 1. first/second are the
// moment estimates and are updated in place.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> first,
               std::span<double> second, const AdamConfig& config, std::uint64_t t);

// Moment buffers keyed by parameter name, plus the step counter.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(std::span<Parameter* const> params);

    const AdamConfig& config() const { return config_; }
    AdamConfig& config() { return config_; }
    std::uint64_t steps() const { return steps_; }

    struct Moments {
        Tensor first;
        Tensor second;
    };
    const std::map<std::string, Moments>& moments() const { return moments_; }
    void restore(std::uint64_t steps, std::map<std::string, Moments> moments);

private:
    AdamConfig config_;
    std::uint64_t steps_ = 0;
    std::map<std::string, Moments> moments_;
};

} // namespace ecgseg::nn
