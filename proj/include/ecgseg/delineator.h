#pragma once

#include "ecgseg/signal.h"
#include "ecgseg/tensor.h"
#include "ecgseg/unet.h"
#include "ecgseg/waves.h"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecgseg {

enum class DelineationMode { PerLead, Averaged, LeadII };

std::string_view to_string(DelineationMode mode);  // "per-lead", "avg", "lead2"
std::optional<DelineationMode> mode_from_string(std::string_view s);

// (4, l) class scores; rows in class order None, P, QRS, T.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    explicit ScoreMatrix(std::size_t length) : length_(length), data_(kNumClasses * length, 0.0) {}

    // Scores of batch item `item` of a (B, 4, l) network output.
    static ScoreMatrix from_output(const Tensor& scores, std::size_t item);

    std::size_t length() const { return length_; }
    double& operator()(std::size_t cls, std::size_t t) { return data_[cls * length_ + t]; }
    double operator()(std::size_t cls, std::size_t t) const { return data_[cls * length_ + t]; }

    friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

private:
    std::size_t length_ = 0;
    std::vector<double> data_;
};

struct WavePrediction {
    WaveType type = WaveType::Qrs;
    std::size_t onset = 0;
    std::size_t offset = 0;

    friend bool operator==(const WavePrediction&, const WavePrediction&) = default;
};

// Column-wise argmax; ties go to the lowest class index.
SegmentationMask argmax_labels(const ScoreMatrix& scores);

// Maximal runs of one non-None label, in order.
std::vector<WavePrediction> extract_segments(const SegmentationMask& mask);

// Element-wise mean. Throws ShapeError on differing lengths or empty input.
ScoreMatrix average_leads(std::span<const ScoreMatrix> scores);

// Drops waves shorter than min_samples.
std::vector<WavePrediction> filter_min_duration(std::span<const WavePrediction> waves, std::size_t min_samples);

// Maps wave indices from a grid of from_count samples to the nearest
// midpoints of a to_count grid over the same duration, keeping the list
// non-overlapping.
std::vector<WavePrediction> map_waves(std::span<const WavePrediction> waves, std::size_t from_count,
                                      std::size_t to_count);

struct PredictionStream {
    std::string name;  // lead name, or "avg" for the averaged stream
    std::vector<WavePrediction> waves;
};

struct DelineationResult {
    std::string record_id;
    DelineationMode mode = DelineationMode::Averaged;
    double sampling_rate = 0.0;
    std::vector<PredictionStream> streams;
    std::size_t signals_processed = 0;  // lead signals passed through the network
};

struct DelineateOptions {
    double model_rate = 500.0;
    double min_duration_ms = 0.0;  // 0 disables the filter
};

// Resamples to the model rate when needed, runs the network on the leads the
// mode needs, combines scores and reports waves on the record's own grid.
// Throws std::invalid_argument when lead II is required but absent.
DelineationResult delineate(const EcgRecord& record, const UNet& model, DelineationMode mode,
                            const DelineateOptions& options = {});

// {"record_id", "mode", "sampling_rate", "waves": [{"lead", "type", "onset", "offset"}]}
std::string delineation_to_json(const DelineationResult& result, int indent = -1);
DelineationResult delineation_from_json(std::string_view text);

} // namespace ecgseg
