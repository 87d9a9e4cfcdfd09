#pragma once

#include "ecgseg/adam.h"
#include "ecgseg/record.h"
#include "ecgseg/unet.h"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ecgseg {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t iterations = 2000;  // total optimizer steps, including resumed ones
    nn::AdamConfig adam;
    std::uint64_t seed = 1;
    double crop_seconds = 4.0;
    double crop_start_min = 2.0;  // seconds
    double crop_start_max = 4.0;
    std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
    std::filesystem::path checkpoint_dir;

    void validate() const;
};

// One lead of one training record with its reference mask.
struct LeadSignal {
    std::string record_id;
    std::size_t lead = 0;
    double sampling_rate = 0.0;
    std::vector<double> samples;
    SegmentationMask mask;
};

struct DatasetSplit {
    std::vector<LeadSignal> train;
    std::vector<LabeledRecord> test;
};

// Training pool = every lead of every training record; test records are
// kept whole. Throws ConfigError on overlapping or unknown ids.
DatasetSplit make_split(std::span<const LabeledRecord> records, std::span<const std::string> train_ids,
                        std::span<const std::string> test_ids);

struct TrainingSample {
    std::vector<double> signal;
    SegmentationMask mask;
    std::string record_id;
    std::size_t lead = 0;
    std::size_t crop_start = 0;  // sample index in the source lead
};

// Random fixed-length fragment whose start time is uniform in
// [crop_start_min, crop_start_max], snapped to the nearest sample. Returns
// nullopt when the signal is too short for the window.
std::optional<TrainingSample> augment_crop(const LeadSignal& source, const TrainConfig& config,
                                           std::mt19937_64& rng);

bool crop_fits(const LeadSignal& source, const TrainConfig& config);

// Random stream for one iteration, derived from (seed, iteration) so that a
// resumed run draws the same batches as an uninterrupted one.
std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t iteration);

struct Batch {
    Tensor input;  // (B, 1, crop length)
    std::vector<SegmentationMask> masks;
    std::vector<TrainingSample> samples;
};

// Batch for 0-based iteration `iteration` drawn from `pool` (all entries
// must fit the crop window).
Batch draw_batch(std::span<const LeadSignal> pool, const TrainConfig& config, std::uint64_t iteration);

struct TrainProgress {
    std::uint64_t iteration = 0;  // 1-based
    double loss = 0.0;
};
using ProgressSink = std::function<void(const TrainProgress&)>;

struct TrainResult {
    std::vector<TrainProgress> history;
    std::vector<std::string> warnings;
};

// Runs iterations model.training_step+1 .. config.iterations. Per iteration:
// draw a batch of crops, forward, cross-entropy, backward, Adam step.
// Throws TrainingError on a non-finite loss.
TrainResult train(UNet& model, nn::Adam& optimizer, const DatasetSplit& split, const TrainConfig& config,
                  const ProgressSink& progress = {});

std::string loss_history_csv(std::span<const TrainProgress> history);

} // namespace ecgseg
