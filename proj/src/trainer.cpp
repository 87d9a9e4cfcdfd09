#include "ecgseg/trainer.h"

#include "ecgseg/checkpoint.h"
#include "ecgseg/errors.h"
#include "ecgseg/layers.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ecgseg {

void TrainConfig::validate() const {
    if (batch_size == 0) {
        throw ConfigError("train: batch_size must be >= 1");
    }
    if (!(crop_seconds > 0.0)) {
        throw ConfigError("train: crop_seconds must be positive");
    }
    if (crop_start_min < 0.0 || crop_start_max < crop_start_min) {
        throw ConfigError("train: crop start window must satisfy 0 <= min <= max");
    }
    if (!(adam.learning_rate >= 0.0) || !(adam.epsilon > 0.0) || adam.beta1 < 0.0 || adam.beta1 >= 1.0 ||
        adam.beta2 < 0.0 || adam.beta2 >= 1.0) {
        throw ConfigError("train: invalid optimizer settings");
    }
}

DatasetSplit make_split(std::span<const LabeledRecord> records, std::span<const std::string> train_ids,
                        std::span<const std::string> test_ids) {
    const std::set<std::string> train(train_ids.begin(), train_ids.end());
    const std::set<std::string> test(test_ids.begin(), test_ids.end());
    std::string overlap;
    for (const auto& id : train) {
        if (test.count(id)) {
            overlap += (overlap.empty() ? "" : ", ") + id;
        }
    }
    if (!overlap.empty()) {
        throw ConfigError("split: ids in both train and test lists: " + overlap);
    }
    std::set<std::string> present;
    for (const auto& r : records) {
        present.insert(r.record.record_id);
    }
    std::string missing;
    for (const auto* ids : {&train, &test}) {
        for (const auto& id : *ids) {
            if (!present.count(id)) {
                missing += (missing.empty() ? "" : ", ") + id;
            }
        }
    }
    if (!missing.empty()) {
        throw ConfigError("split: ids not found in the dataset: " + missing);
    }

    DatasetSplit split;
    for (const auto& r : records) {
        const auto& id = r.record.record_id;
        if (train.count(id)) {
            for (std::size_t k = 0; k < r.record.leads.size(); ++k) {
                split.train.push_back({id, k, r.record.sampling_rate, r.record.signals[k], r.mask(k)});
            }
        } else if (test.count(id)) {
            split.test.push_back(r);
        }
    }
    return split;
}

namespace {

struct CropWindow {
    std::size_t first_start;
    std::size_t last_start;
    std::size_t length;
};

CropWindow crop_window(double rate, const TrainConfig& config) {
    return {static_cast<std::size_t>(std::llround(config.crop_start_min * rate)),
            static_cast<std::size_t>(std::llround(config.crop_start_max * rate)),
            static_cast<std::size_t>(std::llround(config.crop_seconds * rate))};
}

} // namespace

bool crop_fits(const LeadSignal& source, const TrainConfig& config) {
    const auto w = crop_window(source.sampling_rate, config);
    return w.length > 0 && w.last_start + w.length <= source.samples.size();
}

std::optional<TrainingSample> augment_crop(const LeadSignal& source, const TrainConfig& config,
                                           std::mt19937_64& rng) {
    if (!crop_fits(source, config)) {
        return std::nullopt;
    }
    const auto w = crop_window(source.sampling_rate, config);
    std::uniform_real_distribution<double> start_dist(config.crop_start_min, config.crop_start_max);
    const double start_s = start_dist(rng);
    const auto start = std::clamp(static_cast<std::size_t>(std::llround(start_s * source.sampling_rate)),
                                  w.first_start, w.last_start);
    TrainingSample s;
    s.record_id = source.record_id;
    s.lead = source.lead;
    s.crop_start = start;
    s.signal.assign(source.samples.begin() + static_cast<std::ptrdiff_t>(start),
                    source.samples.begin() + static_cast<std::ptrdiff_t>(start + w.length));
    s.mask.assign(source.mask.begin() + static_cast<std::ptrdiff_t>(start),
                  source.mask.begin() + static_cast<std::ptrdiff_t>(start + w.length));
    return s;
}

std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t iteration) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32)};
    return std::mt19937_64(seq);
}

Batch draw_batch(std::span<const LeadSignal> pool, const TrainConfig& config, std::uint64_t iteration) {
    if (pool.empty()) {
        throw ConfigError("train: no training signal is long enough for the crop window");
    }
    auto rng = iteration_rng(config.seed, iteration);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    Batch batch;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
        const LeadSignal& src = pool[pick(rng)];
        auto sample = augment_crop(src, config, rng);
        if (!sample) {
            throw ConfigError("train: signal " + src.record_id + "/" + std::to_string(src.lead) +
                              " does not fit the crop window");
        }
        batch.samples.push_back(std::move(*sample));
    }
    const std::size_t len = batch.samples.front().signal.size();
    batch.input = Tensor(config.batch_size, 1, len);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
        const auto& s = batch.samples[b];
        if (s.signal.size() != len) {
            throw ConfigError("train: crops differ in length; resample all records to one rate first");
        }
        std::copy(s.signal.begin(), s.signal.end(), batch.input.row(b, 0));
        batch.masks.push_back(s.mask);
    }
    return batch;
}

TrainResult train(UNet& model, nn::Adam& optimizer, const DatasetSplit& split, const TrainConfig& config,
                  const ProgressSink& progress) {
    config.validate();
    TrainResult result;
    std::vector<LeadSignal> pool;
    for (const auto& s : split.train) {
        if (crop_fits(s, config)) {
            pool.push_back(s);
        } else {
            result.warnings.push_back("skipping " + s.record_id + " lead " + std::to_string(s.lead) +
                                      ": too short for the crop window");
        }
    }
    if (!config.checkpoint_dir.empty()) {
        std::filesystem::create_directories(config.checkpoint_dir);
    }
    auto params = model.parameters();
    for (std::uint64_t it = model.training_step; it < config.iterations; ++it) {
        Batch batch = draw_batch(pool, config, it);
        model.zero_grad();
        const Tensor scores = model.forward_train(batch.input);
        const nn::LossResult loss = nn::softmax_cross_entropy(scores, batch.masks);
        if (!std::isfinite(loss.loss)) {
            std::ostringstream msg;
            msg << "non-finite loss at iteration " << (it + 1) << "; batch:";
            for (const auto& s : batch.samples) {
                msg << ' ' << s.record_id << '/' << s.lead << '@' << s.crop_start;
            }
            throw TrainingError(msg.str());
        }
        model.backward(loss.grad);
        optimizer.step(params);
        model.training_step = it + 1;
        const TrainProgress p{it + 1, loss.loss};
        result.history.push_back(p);
        if (progress) {
            progress(p);
        }
        if (config.checkpoint_every && !config.checkpoint_dir.empty() &&
            (model.training_step % config.checkpoint_every == 0 || model.training_step == config.iterations)) {
            save_checkpoint(config.checkpoint_dir / ("checkpoint_" + std::to_string(model.training_step) + ".bin"),
                            model, &optimizer);
            save_checkpoint(config.checkpoint_dir / "latest.bin", model, &optimizer);
        }
    }
    return result;
}

std::string loss_history_csv(std::span<const TrainProgress> history) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,loss\n";
    for (const auto& p : history) {
        out << p.iteration << ',' << p.loss << '\n';
    }
    return out.str();
}

} // namespace ecgseg
