#pragma once

#include "ecgseg/delineator.h"
#include "ecgseg/record.h"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecgseg {

enum class PointType { POnset, POffset, QrsOnset, QrsOffset, TOnset, TOffset };

inline constexpr std::array<PointType, 6> kPointTypes{PointType::POnset,   PointType::POffset, PointType::QrsOnset,
                                                      PointType::QrsOffset, PointType::TOnset,  PointType::TOffset};

std::string_view to_string(PointType p);  // "P onset", ..., "T offset"
PointType onset_of(WaveType w);
PointType offset_of(WaveType w);

struct SignificantPoint {
    PointType type = PointType::QrsOnset;
    double time_ms = 0.0;
};

struct MatchResult {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::vector<double> deviations_ms;  // predicted - reference, one per TP

    void merge(const MatchResult& other);
};

struct MatchPair {
    std::size_t ref = 0;
    std::size_t pred = 0;
    double deviation_ms = 0.0;
};

// One-to-one closest-first matching: repeatedly pairs the globally closest
// unmatched (reference, prediction) within tolerance. Ties are broken by
// reference index, then prediction index.
std::vector<MatchPair> greedy_pairs(std::span<const double> ref_ms, std::span<const double> pred_ms,
                                    double tolerance_ms);

// Points of a single type. Unmatched predictions are FP, unmatched
// references FN.
MatchResult match_points(std::span<const double> ref_ms, std::span<const double> pred_ms, double tolerance_ms);

enum class SigmaConvention { Population, Sample };

struct PointMetrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    // Absent when the denominator is zero.
    std::optional<double> se;
    std::optional<double> ppv;
    std::optional<double> f1;
    std::optional<double> mean_ms;
    std::optional<double> sigma_ms;
};

PointMetrics compute_metrics(const MatchResult& result, SigmaConvention sigma = SigmaConvention::Population);

struct EvaluatorConfig {
    double tolerance_ms = 150.0;
    bool exclude_edge_cycles = true;
    SigmaConvention sigma = SigmaConvention::Population;
    // Reference lead a single-stream prediction (avg, lead2) is scored
    // against; empty scores it against every reference lead.
    std::string reference_lead;
};

// Result of dropping the first and last reference QRS complexes.
//
// The window W runs from the offset of the first QRS to the onset of the last
// one. Reference waves strictly inside W are kept; the rest become `guard`
// points. Predicted points further than the tolerance outside W are dropped.
// During matching, predictions that pair with a guard point are discarded
// instead of being counted as false positives.
struct EdgeTrim {
    bool excluded = false;  // fewer than 3 reference QRS complexes
    std::string warning;
    double window_start_ms = 0.0;
    double window_end_ms = 0.0;
    std::vector<SignificantPoint> reference;
    std::vector<SignificantPoint> predicted;
    std::vector<SignificantPoint> guard;
};

EdgeTrim trim_edge_cycles(std::span<const WaveAnnotation> reference, std::span<const WavePrediction> predicted,
                          double sampling_rate, double tolerance_ms);

std::vector<SignificantPoint> points_of(std::span<const WaveAnnotation> waves, double sampling_rate);
std::vector<SignificantPoint> points_of(std::span<const WavePrediction> waves, double sampling_rate);

using PointMatches = std::array<MatchResult, 6>;

// Scores one prediction stream against one reference lead. Returns nullopt
// (and sets `warning`) when edge exclusion rejects the lead.
std::optional<PointMatches> evaluate_stream(std::span<const WaveAnnotation> reference,
                                            std::span<const WavePrediction> predicted, double sampling_rate,
                                            const EvaluatorConfig& config, std::string* warning = nullptr);

struct MetricsReport {
    double tolerance_ms = 150.0;
    SigmaConvention sigma = SigmaConvention::Population;
    std::array<PointMetrics, 6> points;
    std::size_t records = 0;
    std::size_t comparisons = 0;  // (stream, reference lead) pairs scored
    std::vector<std::string> warnings;

    const PointMetrics& operator[](PointType p) const { return points[static_cast<std::size_t>(p)]; }
};

MetricsReport make_report(const PointMatches& pooled, const EvaluatorConfig& config);

// Pools matches over all streams of the record (see EvaluatorConfig for
// single-stream modes).
PointMatches evaluate_record(const LabeledRecord& reference, const DelineationResult& predicted,
                             const EvaluatorConfig& config, std::vector<std::string>* warnings = nullptr,
                             std::size_t* comparisons = nullptr);

// Throws std::invalid_argument listing ids present on only one side.
MetricsReport evaluate_dataset(std::span<const LabeledRecord> references, std::span<const DelineationResult> predicted,
                               const EvaluatorConfig& config);

// Per-lead DelineationResult holding the reference waves, for self-checks.
DelineationResult reference_as_prediction(const LabeledRecord& reference);

std::string render_report_text(const MetricsReport& report);
std::string render_report_csv(const MetricsReport& report);

} // namespace ecgseg
