#include "ecgseg/evaluator.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ecgseg {

std::string_view to_string(PointType p) {
    switch (p) {
    case PointType::POnset:
        return "P onset";
    case PointType::POffset:
        return "P offset";
    case PointType::QrsOnset:
        return "QRS onset";
    case PointType::QrsOffset:
        return "QRS offset";
    case PointType::TOnset:
        return "T onset";
    case PointType::TOffset:
        return "T offset";
    }
    return "?";
}

PointType onset_of(WaveType w) {
    switch (w) {
    case WaveType::P:
        return PointType::POnset;
    case WaveType::Qrs:
        return PointType::QrsOnset;
    case WaveType::T:
        return PointType::TOnset;
    }
    return PointType::QrsOnset;
}

PointType offset_of(WaveType w) { return static_cast<PointType>(static_cast<int>(onset_of(w)) + 1); }

void MatchResult::merge(const MatchResult& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    deviations_ms.insert(deviations_ms.end(), other.deviations_ms.begin(), other.deviations_ms.end());
}

std::vector<MatchPair> greedy_pairs(std::span<const double> ref_ms, std::span<const double> pred_ms,
                                    double tolerance_ms) {
    std::vector<std::size_t> order(pred_ms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pred_ms[a] < pred_ms[b]; });
    std::vector<double> sorted_pred(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted_pred[i] = pred_ms[order[i]];
    }

    std::vector<MatchPair> candidates;
    for (std::size_t r = 0; r < ref_ms.size(); ++r) {
        auto it = std::lower_bound(sorted_pred.begin(), sorted_pred.end(), ref_ms[r] - tolerance_ms);
        for (; it != sorted_pred.end() && *it <= ref_ms[r] + tolerance_ms; ++it) {
            const std::size_t p = order[static_cast<std::size_t>(it - sorted_pred.begin())];
            const double d = pred_ms[p] - ref_ms[r];
            if (std::abs(d) <= tolerance_ms) {
                candidates.push_back({r, p, d});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
        const double da = std::abs(a.deviation_ms);
        const double db = std::abs(b.deviation_ms);
        if (da != db) {
            return da < db;
        }
        return a.ref != b.ref ? a.ref < b.ref : a.pred < b.pred;
    });
    std::vector<bool> ref_used(ref_ms.size(), false);
    std::vector<bool> pred_used(pred_ms.size(), false);
    std::vector<MatchPair> pairs;
    for (const auto& c : candidates) {
        if (!ref_used[c.ref] && !pred_used[c.pred]) {
            ref_used[c.ref] = true;
            pred_used[c.pred] = true;
            pairs.push_back(c);
        }
    }
    return pairs;
}

MatchResult match_points(std::span<const double> ref_ms, std::span<const double> pred_ms, double tolerance_ms) {
    const auto pairs = greedy_pairs(ref_ms, pred_ms, tolerance_ms);
    MatchResult r;
    r.tp = pairs.size();
    r.fn = ref_ms.size() - pairs.size();
    r.fp = pred_ms.size() - pairs.size();
    for (const auto& p : pairs) {
        r.deviations_ms.push_back(p.deviation_ms);
    }
    return r;
}

PointMetrics compute_metrics(const MatchResult& result, SigmaConvention sigma) {
    PointMetrics m;
    m.tp = result.tp;
    m.fp = result.fp;
    m.fn = result.fn;
    const double tp = static_cast<double>(result.tp);
    if (result.tp + result.fn > 0) {
        m.se = tp / static_cast<double>(result.tp + result.fn);
    }
    if (result.tp + result.fp > 0) {
        m.ppv = tp / static_cast<double>(result.tp + result.fp);
    }
    if (m.se && m.ppv) {
        const double s = *m.se + *m.ppv;
        m.f1 = s > 0.0 ? 2.0 * *m.se * *m.ppv / s : 0.0;
    }
    std::vector<double> dev = result.deviations_ms;
    std::sort(dev.begin(), dev.end());
    if (!dev.empty()) {
        const double n = static_cast<double>(dev.size());
        const double mean = std::accumulate(dev.begin(), dev.end(), 0.0) / n;
        double sq = 0.0;
        for (double d : dev) {
            sq += (d - mean) * (d - mean);
        }
        m.mean_ms = mean;
        if (sigma == SigmaConvention::Population) {
            m.sigma_ms = std::sqrt(sq / n);
        } else if (dev.size() > 1) {
            m.sigma_ms = std::sqrt(sq / (n - 1.0));
        }
    }
    return m;
}

namespace {

double to_ms(std::size_t index, double rate) { return static_cast<double>(index) * 1000.0 / rate; }

template <typename Wave>
void append_points(std::vector<SignificantPoint>& out, const Wave& w, double rate) {
    out.push_back({onset_of(w.type), to_ms(w.onset, rate)});
    out.push_back({offset_of(w.type), to_ms(w.offset, rate)});
}

std::vector<double> times_of(std::span<const SignificantPoint> points, PointType type) {
    std::vector<double> t;
    for (const auto& p : points) {
        if (p.type == type) {
            t.push_back(p.time_ms);
        }
    }
    std::sort(t.begin(), t.end());
    return t;
}

} // namespace

std::vector<SignificantPoint> points_of(std::span<const WaveAnnotation> waves, double sampling_rate) {
    std::vector<SignificantPoint> out;
    for (const auto& w : waves) {
        append_points(out, w, sampling_rate);
    }
    return out;
}

std::vector<SignificantPoint> points_of(std::span<const WavePrediction> waves, double sampling_rate) {
    std::vector<SignificantPoint> out;
    for (const auto& w : waves) {
        append_points(out, w, sampling_rate);
    }
    return out;
}

EdgeTrim trim_edge_cycles(std::span<const WaveAnnotation> reference, std::span<const WavePrediction> predicted,
                          double sampling_rate, double tolerance_ms) {
    EdgeTrim t;
    std::vector<WaveAnnotation> ref(reference.begin(), reference.end());
    std::sort(ref.begin(), ref.end(), [](const auto& a, const auto& b) { return a.onset < b.onset; });
    std::vector<const WaveAnnotation*> qrs;
    for (const auto& w : ref) {
        if (w.type == WaveType::Qrs) {
            qrs.push_back(&w);
        }
    }
    if (qrs.size() < 3) {
        t.excluded = true;
        t.warning = "fewer than 3 reference QRS complexes (" + std::to_string(qrs.size()) + ")";
        return t;
    }
    t.window_start_ms = to_ms(qrs.front()->offset, sampling_rate);
    t.window_end_ms = to_ms(qrs.back()->onset, sampling_rate);
    for (const auto& w : ref) {
        const bool inside = to_ms(w.onset, sampling_rate) > t.window_start_ms &&
                            to_ms(w.offset, sampling_rate) < t.window_end_ms;
        append_points(inside ? t.reference : t.guard, w, sampling_rate);
    }
    const double lo = t.window_start_ms - tolerance_ms;
    const double hi = t.window_end_ms + tolerance_ms;
    for (const auto& p : points_of(predicted, sampling_rate)) {
        if (p.time_ms >= lo && p.time_ms <= hi) {
            t.predicted.push_back(p);
        }
    }
    return t;
}

std::optional<PointMatches> evaluate_stream(std::span<const WaveAnnotation> reference,
                                            std::span<const WavePrediction> predicted, double sampling_rate,
                                            const EvaluatorConfig& config, std::string* warning) {
    PointMatches out;
    if (!config.exclude_edge_cycles) {
        const auto ref = points_of(reference, sampling_rate);
        const auto pred = points_of(predicted, sampling_rate);
        for (const PointType p : kPointTypes) {
            out[static_cast<std::size_t>(p)] = match_points(times_of(ref, p), times_of(pred, p), config.tolerance_ms);
        }
        return out;
    }
    const EdgeTrim trim = trim_edge_cycles(reference, predicted, sampling_rate, config.tolerance_ms);
    if (trim.excluded) {
        if (warning) {
            *warning = trim.warning;
        }
        return std::nullopt;
    }
    for (const PointType p : kPointTypes) {
        const auto kept = times_of(trim.reference, p);
        const auto guard = times_of(trim.guard, p);
        std::vector<double> all = kept;
        all.insert(all.end(), guard.begin(), guard.end());
        const auto pred = times_of(trim.predicted, p);
        const auto pairs = greedy_pairs(all, pred, config.tolerance_ms);
        MatchResult& r = out[static_cast<std::size_t>(p)];
        std::size_t absorbed = 0;
        for (const auto& pair : pairs) {
            if (pair.ref < kept.size()) {
                ++r.tp;
                r.deviations_ms.push_back(pair.deviation_ms);
            } else {
                ++absorbed;
            }
        }
        r.fn = kept.size() - r.tp;
        r.fp = pred.size() - r.tp - absorbed;
    }
    return out;
}

MetricsReport make_report(const PointMatches& pooled, const EvaluatorConfig& config) {
    MetricsReport report;
    report.tolerance_ms = config.tolerance_ms;
    report.sigma = config.sigma;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        report.points[i] = compute_metrics(pooled[i], config.sigma);
    }
    return report;
}

PointMatches evaluate_record(const LabeledRecord& reference, const DelineationResult& predicted,
                             const EvaluatorConfig& config, std::vector<std::string>* warnings,
                             std::size_t* comparisons) {
    if (!(config.tolerance_ms > 0.0)) {
        throw std::invalid_argument("evaluator: tolerance must be positive");
    }
    const auto& rec = reference.record;
    if (predicted.sampling_rate != rec.sampling_rate) {
        throw std::invalid_argument("record " + rec.record_id + ": prediction sampling rate " +
                                    std::to_string(predicted.sampling_rate) + " differs from reference " +
                                    std::to_string(rec.sampling_rate));
    }
    PointMatches pooled;
    std::size_t scored = 0;
    auto score = [&](std::size_t lead, std::span<const WavePrediction> pred, const std::string& stream) {
        std::string warning;
        const auto m = evaluate_stream(reference.waves[lead], pred, rec.sampling_rate, config, &warning);
        if (!m) {
            if (warnings) {
                warnings->push_back(rec.record_id + " " + stream + " vs " + rec.leads[lead] + ": excluded, " + warning);
            }
            return;
        }
        ++scored;
        for (std::size_t i = 0; i < pooled.size(); ++i) {
            pooled[i].merge((*m)[i]);
        }
    };

    if (predicted.mode == DelineationMode::PerLead) {
        for (const auto& s : predicted.streams) {
            if (rec.find_lead(s.name) == std::string::npos && warnings) {
                warnings->push_back(rec.record_id + ": prediction stream '" + s.name + "' has no reference lead");
            }
        }
        for (std::size_t k = 0; k < rec.leads.size(); ++k) {
            const auto it = std::find_if(predicted.streams.begin(), predicted.streams.end(),
                                         [&](const auto& s) { return rec.find_lead(s.name) == k; });
            const std::vector<WavePrediction> none;
            score(k, it == predicted.streams.end() ? std::span<const WavePrediction>(none)
                                                   : std::span<const WavePrediction>(it->waves),
                  rec.leads[k]);
        }
    } else {
        if (predicted.streams.size() > 1) {
            throw std::invalid_argument("record " + rec.record_id + ": " + std::string(to_string(predicted.mode)) +
                                        " prediction must hold a single stream");
        }
        const std::vector<WavePrediction> none;
        const auto pred = predicted.streams.empty() ? std::span<const WavePrediction>(none)
                                                    : std::span<const WavePrediction>(predicted.streams.front().waves);
        const std::string name = predicted.streams.empty() ? std::string(to_string(predicted.mode))
                                                           : predicted.streams.front().name;
        if (!config.reference_lead.empty()) {
            const std::size_t k = rec.find_lead(config.reference_lead);
            if (k == std::string::npos) {
                throw std::invalid_argument("record " + rec.record_id + " has no reference lead " +
                                            config.reference_lead);
            }
            score(k, pred, name);
        } else {
            for (std::size_t k = 0; k < rec.leads.size(); ++k) {
                score(k, pred, name);
            }
        }
    }
    if (comparisons) {
        *comparisons += scored;
    }
    return pooled;
}

MetricsReport evaluate_dataset(std::span<const LabeledRecord> references, std::span<const DelineationResult> predicted,
                               const EvaluatorConfig& config) {
    std::map<std::string, const LabeledRecord*> refs;
    for (const auto& r : references) {
        refs.emplace(r.record.record_id, &r);
    }
    std::map<std::string, const DelineationResult*> preds;
    for (const auto& p : predicted) {
        preds.emplace(p.record_id, &p);
    }
    std::string only_ref, only_pred;
    for (const auto& [id, _] : refs) {
        if (!preds.count(id)) {
            only_ref += (only_ref.empty() ? "" : ", ") + id;
        }
    }
    for (const auto& [id, _] : preds) {
        if (!refs.count(id)) {
            only_pred += (only_pred.empty() ? "" : ", ") + id;
        }
    }
    if (!only_ref.empty() || !only_pred.empty()) {
        std::string msg = "record ids differ between reference and prediction sets";
        if (!only_ref.empty()) {
            msg += "; only in reference: " + only_ref;
        }
        if (!only_pred.empty()) {
            msg += "; only in predictions: " + only_pred;
        }
        throw std::invalid_argument(msg);
    }
    PointMatches pooled;
    std::vector<std::string> warnings;
    std::size_t comparisons = 0;
    for (const auto& [id, ref] : refs) {
        const auto m = evaluate_record(*ref, *preds.at(id), config, &warnings, &comparisons);
        for (std::size_t i = 0; i < pooled.size(); ++i) {
            pooled[i].merge(m[i]);
        }
    }
    MetricsReport report = make_report(pooled, config);
    report.records = refs.size();
    report.comparisons = comparisons;
    report.warnings = std::move(warnings);
    return report;
}

DelineationResult reference_as_prediction(const LabeledRecord& reference) {
    DelineationResult r;
    r.record_id = reference.record.record_id;
    r.mode = DelineationMode::PerLead;
    r.sampling_rate = reference.record.sampling_rate;
    for (std::size_t k = 0; k < reference.record.leads.size(); ++k) {
        PredictionStream s{reference.record.leads[k], {}};
        for (const auto& w : reference.waves[k]) {
            s.waves.push_back({w.type, w.onset, w.offset});
        }
        r.streams.push_back(std::move(s));
    }
    return r;
}

} // namespace ecgseg
