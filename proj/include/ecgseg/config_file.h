#pragma once

#include "ecgseg/delineator.h"
#include "ecgseg/evaluator.h"
#include "ecgseg/trainer.h"
#include "ecgseg/unet.h"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ecgseg {

// INI-style settings shared by the train, segment and evaluate commands:
//
//   [data]     root, train_ids, test_ids, train_fraction
//   [model]    preset (default|tiny), widths, bottleneck
//   [train]    batch_size, iterations, learning_rate, beta1, beta2, epsilon,
//              seed, crop_seconds, crop_start_min, crop_start_max,
//              checkpoint_every, checkpoint_dir
//   [segment]  mode, model_rate, min_duration_ms
//   [evaluate] tolerance, edge_exclusion, sigma, reference_lead
//
// [train] seed is the only seed; it also drives weight init and the split.
// Unknown sections or keys are rejected.
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text);
    static ConfigFile load(const std::filesystem::path& path);

    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    void set(const std::string& section, const std::string& key, const std::string& value);

    void apply(ModelConfig& model) const;
    void apply(TrainConfig& train) const;
    void apply(DelineateOptions& segment, DelineationMode& mode) const;
    void apply(EvaluatorConfig& evaluate) const;

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
};

// "150", "150ms", "0.15s" -> milliseconds.
double parse_duration_ms(const std::string& text);

std::vector<std::string> split_list(const std::string& text);

} // namespace ecgseg
