#include "ecgseg/record_json.h"

#include "ecgseg/errors.h"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ecgseg::json_io {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) {
        throw ParseError(where + ": expected an object");
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError(where + ": missing key \"" + key + "\"");
    }
    return *it;
}

std::size_t require_index(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ParseError(where + ": \"" + key + "\" must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

} // namespace

std::string write_record(const LabeledRecord& labeled, int indent) {
    const auto& rec = labeled.record;
    json leads = json::array();
    for (std::size_t k = 0; k < rec.leads.size(); ++k) {
        json waves = json::array();
        if (k < labeled.waves.size()) {
            for (const auto& w : labeled.waves[k]) {
                waves.push_back({{"type", std::string(to_string(w.type))},
                                 {"onset", w.onset},
                                 {"peak", w.peak},
                                 {"offset", w.offset}});
            }
        }
        leads.push_back({{"name", rec.leads[k]}, {"samples_mV", rec.signals[k]}, {"waves", std::move(waves)}});
    }
    const json doc = {{"record_id", rec.record_id}, {"sampling_rate", rec.sampling_rate}, {"leads", std::move(leads)}};
    return doc.dump(indent);
}

LabeledRecord read_record(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    LabeledRecord out;
    auto& rec = out.record;
    const json& id = require(doc, "record_id", "record");
    if (!id.is_string()) {
        throw ParseError("record: \"record_id\" must be a string");
    }
    rec.record_id = id.get<std::string>();
    const std::string where = "record " + rec.record_id;
    const json& fs = require(doc, "sampling_rate", where);
    if (!fs.is_number() || !(fs.get<double>() > 0.0)) {
        throw ParseError(where + ": \"sampling_rate\" must be a positive number");
    }
    rec.sampling_rate = fs.get<double>();
    const json& leads = require(doc, "leads", where);
    if (!leads.is_array() || leads.empty()) {
        throw ParseError(where + ": \"leads\" must be a non-empty array");
    }
    for (std::size_t k = 0; k < leads.size(); ++k) {
        const std::string lw = where + ", leads[" + std::to_string(k) + "]";
        const json& name = require(leads[k], "name", lw);
        if (!name.is_string()) {
            throw ParseError(lw + ": \"name\" must be a string");
        }
        const json& samples = require(leads[k], "samples_mV", lw);
        if (!samples.is_array()) {
            throw ParseError(lw + ": \"samples_mV\" must be an array");
        }
        std::vector<double> values;
        values.reserve(samples.size());
        for (const auto& v : samples) {
            if (!v.is_number()) {
                throw ParseError(lw + ": \"samples_mV\" must hold numbers");
            }
            values.push_back(v.get<double>());
        }
        std::vector<WaveAnnotation> waves;
        if (const auto it = leads[k].find("waves"); it != leads[k].end()) {
            if (!it->is_array()) {
                throw ParseError(lw + ": \"waves\" must be an array");
            }
            for (std::size_t i = 0; i < it->size(); ++i) {
                const json& w = (*it)[i];
                const std::string ww = lw + ".waves[" + std::to_string(i) + "]";
                const json& type = require(w, "type", ww);
                const auto wt = type.is_string() ? wave_type_from_string(type.get<std::string>()) : std::nullopt;
                if (!wt) {
                    throw ParseError(ww + ": \"type\" must be one of P, QRS, T");
                }
                WaveAnnotation a;
                a.type = *wt;
                a.onset = require_index(w, "onset", ww);
                a.offset = require_index(w, "offset", ww);
                a.peak = w.contains("peak") ? require_index(w, "peak", ww) : (a.onset + a.offset) / 2;
                a.lead = k;
                waves.push_back(a);
            }
        }
        rec.leads.push_back(name.get<std::string>());
        rec.signals.push_back(std::move(values));
        out.waves.push_back(std::move(waves));
    }
    try {
        out.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return out;
}

LabeledRecord load_record(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return read_record(ss.str());
}

void save_record(const LabeledRecord& labeled, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << write_record(labeled) << '\n';
}

} // namespace ecgseg::json_io
