#pragma once

#include "ecgseg/record.h"

#include <cstdint>
#include <string>
#include <vector>

// Sum-of-Gaussians 12-lead ECG with exact wave boundaries, annotated the
// way LUDB is: the first and last marked waves are QRS complexes and the
// cycles outside them carry no labels.
namespace ecgseg::synth {

struct SyntheticConfig {
    std::string record_id = "synthetic";
    double sampling_rate = 500.0;
    double duration = 10.0;       // seconds
    double heart_rate_min = 60.0;  // bpm, drawn uniformly per record
    double heart_rate_max = 90.0;
    double rr_jitter = 0.03;      // relative std of beat-to-beat intervals
    double noise_mv = 0.01;
    double wander_mv = 0.05;
    double annotation_margin = 0.8;  // seconds at each end without labeled QRS
    std::uint64_t seed = 1;
};

const std::vector<std::string>& ludb_lead_names();

LabeledRecord generate(const SyntheticConfig& config);

} // namespace ecgseg::synth
