#include "ecgseg/delineator.h"

#include "ecgseg/errors.h"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace ecgseg {

std::string_view to_string(DelineationMode mode) {
    switch (mode) {
    case DelineationMode::PerLead:
        return "per-lead";
    case DelineationMode::Averaged:
        return "avg";
    case DelineationMode::LeadII:
        return "lead2";
    }
    return "?";
}

std::optional<DelineationMode> mode_from_string(std::string_view s) {
    if (s == "per-lead") {
        return DelineationMode::PerLead;
    }
    if (s == "avg") {
        return DelineationMode::Averaged;
    }
    if (s == "lead2") {
        return DelineationMode::LeadII;
    }
    return std::nullopt;
}

ScoreMatrix ScoreMatrix::from_output(const Tensor& scores, std::size_t item) {
    if (scores.channels() != kNumClasses || item >= scores.batch()) {
        throw ShapeError("score tensor " + scores.shape_string() + " has no item " + std::to_string(item));
    }
    ScoreMatrix m(scores.length());
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::copy_n(scores.row(item, c), scores.length(), m.data_.begin() + static_cast<std::ptrdiff_t>(c * m.length_));
    }
    return m;
}

SegmentationMask argmax_labels(const ScoreMatrix& scores) {
    SegmentationMask mask(scores.length(), Label::None);
    for (std::size_t t = 0; t < scores.length(); ++t) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < kNumClasses; ++c) {
            if (scores(c, t) > scores(best, t)) {
                best = c;
            }
        }
        mask[t] = static_cast<Label>(best);
    }
    return mask;
}

std::vector<WavePrediction> extract_segments(const SegmentationMask& mask) {
    std::vector<WavePrediction> waves;
    std::size_t i = 0;
    while (i < mask.size()) {
        const Label l = mask[i];
        std::size_t j = i;
        while (j + 1 < mask.size() && mask[j + 1] == l) {
            ++j;
        }
        if (l != Label::None) {
            waves.push_back({static_cast<WaveType>(l), i, j});
        }
        i = j + 1;
    }
    return waves;
}

ScoreMatrix average_leads(std::span<const ScoreMatrix> scores) {
    if (scores.empty()) {
        throw ShapeError("average_leads: no score matrices");
    }
    const std::size_t len = scores.front().length();
    ScoreMatrix mean(len);
    for (const auto& s : scores) {
        if (s.length() != len) {
            throw ShapeError("average_leads: score matrices differ in length");
        }
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            for (std::size_t t = 0; t < len; ++t) {
                mean(c, t) += s(c, t);
            }
        }
    }
    const double n = static_cast<double>(scores.size());
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        for (std::size_t t = 0; t < len; ++t) {
            mean(c, t) /= n;
        }
    }
    return mean;
}

std::vector<WavePrediction> filter_min_duration(std::span<const WavePrediction> waves, std::size_t min_samples) {
    std::vector<WavePrediction> out;
    for (const auto& w : waves) {
        if (w.offset - w.onset + 1 >= min_samples) {
            out.push_back(w);
        }
    }
    return out;
}

std::vector<WavePrediction> map_waves(std::span<const WavePrediction> waves, std::size_t from_count,
                                      std::size_t to_count) {
    std::vector<WavePrediction> out;
    out.reserve(waves.size());
    for (auto w : waves) {
        w.onset = map_index(w.onset, from_count, to_count);
        w.offset = map_index(w.offset, from_count, to_count);
        if (!out.empty() && w.onset <= out.back().offset) {
            w.onset = out.back().offset + 1;
            if (w.onset > w.offset) {
                continue;
            }
        }
        out.push_back(w);
    }
    return out;
}

DelineationResult delineate(const EcgRecord& record, const UNet& model, DelineationMode mode,
                            const DelineateOptions& options) {
    record.validate();
    DelineationResult result;
    result.record_id = record.record_id;
    result.mode = mode;
    result.sampling_rate = record.sampling_rate;

    std::vector<std::size_t> leads;
    if (mode == DelineationMode::LeadII) {
        const std::size_t ii = record.find_lead("II");
        if (ii == EcgRecord::npos) {
            throw std::invalid_argument("record " + record.record_id + " has no lead II");
        }
        leads.push_back(ii);
    } else {
        for (std::size_t k = 0; k < record.leads.size(); ++k) {
            leads.push_back(k);
        }
    }

    const std::size_t n = record.sample_count();
    const bool same_rate = record.sampling_rate == options.model_rate;
    const std::size_t m = same_rate ? n : resampled_length(n, record.sampling_rate, options.model_rate);
    Tensor input(leads.size(), 1, m);
    for (std::size_t b = 0; b < leads.size(); ++b) {
        const auto& src = record.signals[leads[b]];
        if (same_rate) {
            std::copy(src.begin(), src.end(), input.row(b, 0));
        } else {
            const auto r = resample_signal(src, record.sampling_rate, options.model_rate);
            std::copy(r.begin(), r.end(), input.row(b, 0));
        }
    }
    const Tensor scores = model.predict(input);
    result.signals_processed = leads.size();

    const auto min_samples =
        static_cast<std::size_t>(std::llround(options.min_duration_ms * options.model_rate / 1000.0));
    auto finish = [&](const ScoreMatrix& s) {
        auto waves = extract_segments(argmax_labels(s));
        if (min_samples > 1) {
            waves = filter_min_duration(waves, min_samples);
        }
        return same_rate ? waves : map_waves(waves, m, n);
    };

    if (mode == DelineationMode::Averaged) {
        std::vector<ScoreMatrix> per_lead;
        for (std::size_t b = 0; b < leads.size(); ++b) {
            per_lead.push_back(ScoreMatrix::from_output(scores, b));
        }
        result.streams.push_back({"avg", finish(average_leads(per_lead))});
    } else {
        for (std::size_t b = 0; b < leads.size(); ++b) {
            result.streams.push_back({record.leads[leads[b]], finish(ScoreMatrix::from_output(scores, b))});
        }
    }
    return result;
}

std::string delineation_to_json(const DelineationResult& result, int indent) {
    using nlohmann::json;
    json waves = json::array();
    for (const auto& s : result.streams) {
        for (const auto& w : s.waves) {
            waves.push_back({{"lead", s.name}, {"type", std::string(to_string(w.type))}, {"onset", w.onset},
                             {"offset", w.offset}});
        }
    }
    const json doc = {{"record_id", result.record_id},
                      {"mode", std::string(to_string(result.mode))},
                      {"sampling_rate", result.sampling_rate},
                      {"waves", std::move(waves)}};
    return doc.dump(indent);
}

DelineationResult delineation_from_json(std::string_view text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    auto need = [](const json& o, const char* key, const std::string& where) -> const json& {
        if (!o.is_object() || !o.contains(key)) {
            throw ParseError(where + ": missing key \"" + key + "\"");
        }
        return o.at(key);
    };
    DelineationResult r;
    const json& id = need(doc, "record_id", "delineation");
    if (!id.is_string()) {
        throw ParseError("delineation: \"record_id\" must be a string");
    }
    r.record_id = id.get<std::string>();
    const std::string where = "delineation " + r.record_id;
    const json& mode = need(doc, "mode", where);
    const auto m = mode.is_string() ? mode_from_string(mode.get<std::string>()) : std::nullopt;
    if (!m) {
        throw ParseError(where + ": \"mode\" must be per-lead, avg or lead2");
    }
    r.mode = *m;
    const json& fs = need(doc, "sampling_rate", where);
    if (!fs.is_number() || !(fs.get<double>() > 0.0)) {
        throw ParseError(where + ": \"sampling_rate\" must be a positive number");
    }
    r.sampling_rate = fs.get<double>();
    const json& waves = need(doc, "waves", where);
    if (!waves.is_array()) {
        throw ParseError(where + ": \"waves\" must be an array");
    }
    for (std::size_t i = 0; i < waves.size(); ++i) {
        const std::string ww = where + ", waves[" + std::to_string(i) + "]";
        const json& w = waves[i];
        const json& lead = need(w, "lead", ww);
        const json& type = need(w, "type", ww);
        const json& on = need(w, "onset", ww);
        const json& off = need(w, "offset", ww);
        const auto t = type.is_string() ? wave_type_from_string(type.get<std::string>()) : std::nullopt;
        if (!lead.is_string() || !t || !on.is_number_unsigned() || !off.is_number_unsigned() ||
            on.get<std::size_t>() > off.get<std::size_t>()) {
            throw ParseError(ww + ": malformed wave");
        }
        const std::string name = lead.get<std::string>();
        auto it = std::find_if(r.streams.begin(), r.streams.end(), [&](const auto& s) { return s.name == name; });
        if (it == r.streams.end()) {
            r.streams.push_back({name, {}});
            it = std::prev(r.streams.end());
        }
        it->waves.push_back({*t, on.get<std::size_t>(), off.get<std::size_t>()});
    }
    return r;
}

} // namespace ecgseg
