#include "ecgseg/config_file.h"

#include "ecgseg/errors.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace ecgseg {

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"data", {"root", "train_ids", "test_ids", "train_fraction"}},
        {"model", {"preset", "widths", "bottleneck"}},
        {"train",
         {"batch_size", "iterations", "learning_rate", "beta1", "beta2", "epsilon", "seed", "crop_seconds",
          "crop_start_min", "crop_start_max", "checkpoint_every", "checkpoint_dir"}},
        {"segment", {"mode", "model_rate", "min_duration_ms"}},
        {"evaluate", {"tolerance", "edge_exclusion", "sigma", "reference_lead"}},
    };
    return keys;
}

std::string trim(std::string s) {
    auto space = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), space));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), space).base(), s.end());
    return s;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

double to_double(const std::string& section, const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) {
        throw ConfigError(where(section, key) + ": expected a number, got \"" + v + "\"");
    }
    return out;
}

std::uint64_t to_uint(const std::string& section, const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) {
        throw ConfigError(where(section, key) + ": expected a non-negative integer, got \"" + v + "\"");
    }
    return out;
}

bool to_bool(const std::string& section, const std::string& key, const std::string& v) {
    const auto s = lower(v);
    if (s == "true" || s == "yes" || s == "on" || s == "1") {
        return true;
    }
    if (s == "false" || s == "no" || s == "off" || s == "0") {
        return false;
    }
    throw ConfigError(where(section, key) + ": expected a boolean, got \"" + v + "\"");
}

} // namespace

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char c : text) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!item.empty()) {
                out.push_back(item);
            }
            item.clear();
        } else {
            item += c;
        }
    }
    if (!item.empty()) {
        out.push_back(item);
    }
    return out;
}

double parse_duration_ms(const std::string& text) {
    std::string s = lower(trim(text));
    double scale = 1.0;
    if (s.size() > 2 && s.ends_with("ms")) {
        s.resize(s.size() - 2);
    } else if (s.size() > 1 && s.ends_with('s')) {
        s.resize(s.size() - 1);
        scale = 1000.0;
    }
    s = trim(s);
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || p != end || !(v > 0.0)) {
        throw ConfigError("invalid duration \"" + text + "\" (expected e.g. 150, 150ms or 0.15s)");
    }
    return v * scale;
}

ConfigFile ConfigFile::parse(const std::string& text) {
    // Accept '#' comments too; the INI parser only knows ';'.
    std::istringstream in(text);
    std::ostringstream cleaned;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (!t.empty() && t.front() == '#') {
            cleaned << '\n';
        } else {
            cleaned << line << '\n';
        }
    }
    boost::property_tree::ptree tree;
    std::istringstream src(cleaned.str());
    try {
        boost::property_tree::ini_parser::read_ini(src, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }

    ConfigFile cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ConfigError("key \"" + section + "\" outside of any section");
        }
        for (const auto& [key, value] : body) {
            cfg.set(section, key, value.data());
        }
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<std::string> ConfigFile::get(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    if (s == values_.end()) {
        return std::nullopt;
    }
    auto k = s->second.find(key);
    if (k == s->second.end()) {
        return std::nullopt;
    }
    return k->second;
}

void ConfigFile::set(const std::string& section, const std::string& key, const std::string& value) {
    const auto& keys = known_keys();
    auto s = keys.find(section);
    if (s == keys.end()) {
        throw ConfigError("unknown config section [" + section + "]");
    }
    if (!s->second.contains(key)) {
        throw ConfigError("unknown config key " + where(section, key));
    }
    values_[section][key] = trim(value);
}

void ConfigFile::apply(ModelConfig& model) const {
    if (auto v = get("model", "preset")) {
        const auto seed = model.seed;
        const auto p = lower(*v);
        if (p == "tiny") {
            model = ModelConfig::tiny();
        } else if (p == "default") {
            model = ModelConfig{};
        } else {
            throw ConfigError("[model] preset: expected default or tiny, got \"" + *v + "\"");
        }
        model.seed = seed;
    }
    if (auto v = get("model", "widths")) {
        const auto items = split_list(*v);
        if (items.size() != model.encoder_widths.size()) {
            throw ConfigError("[model] widths: expected 4 values");
        }
        for (std::size_t i = 0; i < items.size(); ++i) {
            model.encoder_widths[i] = to_uint("model", "widths", items[i]);
        }
    }
    if (auto v = get("model", "bottleneck")) {
        model.bottleneck_width = to_uint("model", "bottleneck", *v);
    }
    for (auto w : model.encoder_widths) {
        if (w == 0) {
            throw ConfigError("[model] widths must be positive");
        }
    }
    if (model.bottleneck_width == 0) {
        throw ConfigError("[model] bottleneck must be positive");
    }
}

void ConfigFile::apply(TrainConfig& train) const {
    auto num = [&](const char* key, double& out) {
        if (auto v = get("train", key)) {
            out = to_double("train", key, *v);
        }
    };
    auto count = [&](const char* key, std::size_t& out) {
        if (auto v = get("train", key)) {
            out = static_cast<std::size_t>(to_uint("train", key, *v));
        }
    };
    count("batch_size", train.batch_size);
    count("iterations", train.iterations);
    count("checkpoint_every", train.checkpoint_every);
    num("learning_rate", train.adam.learning_rate);
    num("beta1", train.adam.beta1);
    num("beta2", train.adam.beta2);
    num("epsilon", train.adam.epsilon);
    num("crop_seconds", train.crop_seconds);
    num("crop_start_min", train.crop_start_min);
    num("crop_start_max", train.crop_start_max);
    if (auto v = get("train", "seed")) {
        train.seed = to_uint("train", "seed", *v);
    }
    if (auto v = get("train", "checkpoint_dir")) {
        train.checkpoint_dir = *v;
    }
    train.validate();
}

void ConfigFile::apply(DelineateOptions& segment, DelineationMode& mode) const {
    if (auto v = get("segment", "mode")) {
        auto m = mode_from_string(*v);
        if (!m) {
            throw ConfigError("[segment] mode: expected per-lead, avg or lead2, got \"" + *v + "\"");
        }
        mode = *m;
    }
    if (auto v = get("segment", "model_rate")) {
        segment.model_rate = to_double("segment", "model_rate", *v);
        if (!(segment.model_rate > 0.0)) {
            throw ConfigError("[segment] model_rate must be positive");
        }
    }
    if (auto v = get("segment", "min_duration_ms")) {
        segment.min_duration_ms = to_double("segment", "min_duration_ms", *v);
        if (segment.min_duration_ms < 0.0) {
            throw ConfigError("[segment] min_duration_ms must be non-negative");
        }
    }
}

void ConfigFile::apply(EvaluatorConfig& evaluate) const {
    if (auto v = get("evaluate", "tolerance")) {
        evaluate.tolerance_ms = parse_duration_ms(*v);
    }
    if (auto v = get("evaluate", "edge_exclusion")) {
        evaluate.exclude_edge_cycles = to_bool("evaluate", "edge_exclusion", *v);
    }
    if (auto v = get("evaluate", "sigma")) {
        const auto s = lower(*v);
        if (s == "population") {
            evaluate.sigma = SigmaConvention::Population;
        } else if (s == "sample") {
            evaluate.sigma = SigmaConvention::Sample;
        } else {
            throw ConfigError("[evaluate] sigma: expected population or sample, got \"" + *v + "\"");
        }
    }
    if (auto v = get("evaluate", "reference_lead")) {
        evaluate.reference_lead = *v;
    }
}

} // namespace ecgseg
