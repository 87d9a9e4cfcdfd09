#include "ecgseg/adam.h"

#include "ecgseg/errors.h"

#include <cmath>
#include <stdexcept>

namespace ecgseg::nn {

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> first,
               std::span<double> second, const AdamConfig& config, std::uint64_t t) {
    if (t == 0) {
        throw std::invalid_argument("adam_step: step counter starts at 1");
    }
    if (grads.size() != params.size() || first.size() != params.size() || second.size() != params.size()) {
        throw ShapeError("adam_step: buffer sizes differ");
    }
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        first[i] = config.beta1 * first[i] + (1.0 - config.beta1) * grads[i];
        second[i] = config.beta2 * second[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = first[i] / c1;
        const double v_hat = second[i] / c2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

void Adam::step(std::span<Parameter* const> params) {
    ++steps_;
    for (Parameter* p : params) {
        auto it = moments_.find(p->name);
        if (it == moments_.end()) {
            const Tensor& v = p->value;
            it = moments_
                     .emplace(p->name, Moments{Tensor(v.batch(), v.channels(), v.length()),
                                               Tensor(v.batch(), v.channels(), v.length())})
                     .first;
        }
        adam_step(p->value.values(), p->grad.values(), it->second.first.values(), it->second.second.values(),
                  config_, steps_);
    }
}

void Adam::restore(std::uint64_t steps, std::map<std::string, Moments> moments) {
    steps_ = steps;
    moments_ = std::move(moments);
}

} // namespace ecgseg::nn
