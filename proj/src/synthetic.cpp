#include "ecgseg/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ecgseg::synth {

namespace {

struct LeadShape {
    double p, q, r, s, t;
};

// Rough per-lead polarity and amplitude pattern of a normal 12-lead ECG.
constexpr LeadShape kShapes[12] = {
    {0.10, -0.05, 0.70, -0.10, 0.20},  // i
    {0.15, -0.10, 1.10, -0.20, 0.30},  // ii
    {0.06, -0.06, 0.40, -0.15, 0.10},  // iii
    {-0.12, 0.05, -0.80, 0.10, -0.22},  // avr
    {0.05, -0.04, 0.35, -0.08, 0.10},  // avl
    {0.10, -0.07, 0.75, -0.15, 0.20},  // avf
    {0.08, 0.00, 0.25, -0.90, -0.08},  // v1
    {0.10, 0.00, 0.50, -1.10, 0.35},   // v2
    {0.10, -0.05, 0.80, -0.70, 0.40},  // v3
    {0.10, -0.08, 1.30, -0.40, 0.40},  // v4
    {0.10, -0.10, 1.20, -0.25, 0.35},  // v5
    {0.10, -0.08, 0.90, -0.15, 0.25},  // v6
};

struct Bump {
    double center, width, amplitude;
};

struct Beat {
    double r;
    std::vector<Bump> bumps;  // P, Q, R, S, T
    double p_on, p_off, qrs_on, qrs_off, t_on, t_off;
};

double gaussian(double t, const Bump& b) {
    const double z = (t - b.center) / b.width;
    return b.amplitude * std::exp(-0.5 * z * z);
}

} // namespace

const std::vector<std::string>& ludb_lead_names() {
    static const std::vector<std::string> names{"i",   "ii",  "iii", "avr", "avl", "avf",
                                                "v1", "v2", "v3",  "v4",  "v5",  "v6"};
    return names;
}

LabeledRecord generate(const SyntheticConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double hr = config.heart_rate_min + (config.heart_rate_max - config.heart_rate_min) * unit(rng);
    const double rr_mean = 60.0 / hr;
    const double p_width = 0.016 + 0.004 * unit(rng);
    const double t_width = 0.040 + 0.010 * unit(rng);
    const double pr = 0.15 + 0.03 * unit(rng);
    const double amp_scale = 0.8 + 0.4 * unit(rng);

    std::vector<Beat> beats;
    double r = 0.25 + 0.35 * unit(rng);
    while (r < config.duration) {
        const double rr = rr_mean * (1.0 + config.rr_jitter * normal(rng));
        Beat b;
        b.r = r;
        const Bump p{r - pr, p_width, 1.0};
        const Bump q{r - 0.025, 0.008, 1.0};
        const Bump rr_bump{r, 0.010, 1.0};
        const Bump s{r + 0.028, 0.009, 1.0};
        const Bump t{r + 0.30 * std::sqrt(rr_mean), t_width, 1.0};
        b.bumps = {p, q, rr_bump, s, t};
        b.p_on = p.center - 2.5 * p.width;
        b.p_off = p.center + 2.5 * p.width;
        b.qrs_on = q.center - 2.5 * q.width;
        b.qrs_off = s.center + 2.5 * s.width;
        b.t_on = t.center - 2.5 * t.width;
        b.t_off = t.center + 2.5 * t.width;
        beats.push_back(b);
        r += rr;
    }

    const auto n = static_cast<std::size_t>(std::llround(config.duration * config.sampling_rate));
    const auto& names = ludb_lead_names();
    LabeledRecord out;
    out.record.record_id = config.record_id;
    out.record.sampling_rate = config.sampling_rate;
    out.record.leads = names;
    out.record.signals.assign(names.size(), std::vector<double>(n, 0.0));
    out.waves.assign(names.size(), {});

    const double wander_phase = 2.0 * std::numbers::pi * unit(rng);
    const double wander_freq = 0.15 + 0.2 * unit(rng);
    for (std::size_t k = 0; k < names.size(); ++k) {
        const LeadShape& sh = kShapes[k];
        const double gains[5] = {sh.p, sh.q, sh.r, sh.s, sh.t};
        auto& sig = out.record.signals[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / config.sampling_rate;
            double v = config.wander_mv * std::sin(2.0 * std::numbers::pi * wander_freq * t + wander_phase);
            for (const Beat& b : beats) {
                if (std::abs(t - b.r) > 1.0) {
                    continue;
                }
                for (std::size_t j = 0; j < 5; ++j) {
                    v += amp_scale * gains[j] * gaussian(t, b.bumps[j]);
                }
            }
            sig[i] = v + config.noise_mv * normal(rng);
        }
    }

    // Labeled span: QRS complexes with R peaks inside the margins.
    std::size_t first = beats.size(), last = 0;
    for (std::size_t i = 0; i < beats.size(); ++i) {
        if (beats[i].r >= config.annotation_margin && beats[i].r <= config.duration - config.annotation_margin) {
            first = std::min(first, i);
            last = i;
        }
    }
    auto idx = [&](double t) {
        return static_cast<std::size_t>(std::llround(std::clamp(t, 0.0, config.duration) * config.sampling_rate));
    };
    std::vector<WaveAnnotation> waves;
    for (std::size_t i = first; i <= last && i < beats.size(); ++i) {
        const Beat& b = beats[i];
        if (i > first) {
            waves.push_back({WaveType::P, idx(b.p_on), idx(b.bumps[0].center), idx(b.p_off), 0});
        }
        waves.push_back({WaveType::Qrs, idx(b.qrs_on), idx(b.r), idx(b.qrs_off), 0});
        if (i < last) {
            waves.push_back({WaveType::T, idx(b.t_on), idx(b.bumps[4].center), idx(b.t_off), 0});
        }
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
        out.waves[k] = waves;
        for (auto& w : out.waves[k]) {
            w.lead = k;
        }
    }
    return out;
}

} // namespace ecgseg::synth
