#include "cli.h"

#include "ecgseg/checkpoint.h"
#include "ecgseg/config_file.h"
#include "ecgseg/delineator.h"
#include "ecgseg/errors.h"
#include "ecgseg/evaluator.h"
#include "ecgseg/record_json.h"
#include "ecgseg/svg.h"
#include "ecgseg/synthetic.h"
#include "ecgseg/trainer.h"
#include "ecgseg/wfdb.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace ecgseg::cli {

namespace {

// Input paths that do not exist or cannot be used at all.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string lower_ext(const fs::path& p) {
    auto e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

// Files named directly are taken as is; directories contribute their
// entries with one of `exts`, sorted by name.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs, const std::set<std::string>& exts) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && exts.contains(lower_ext(e.path()))) {
                    found.push_back(e.path());
                }
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            out.push_back(p);
        } else {
            throw UsageError("no such file or directory: " + in);
        }
    }
    return out;
}

wfdb::LoadedRecord load_wfdb(const fs::path& header_path) {
    const auto header = wfdb::parse_header(read_text(header_path));
    return wfdb::read_record(header_path, wfdb::ludb_annotation_files(header_path, header));
}

LabeledRecord load_labeled(const fs::path& path, std::ostream& err) {
    if (lower_ext(path) == ".hea") {
        auto loaded = load_wfdb(path);
        for (const auto& w : loaded.warnings) {
            err << "warning: " << path.string() << ": " << w << '\n';
        }
        return std::move(loaded.labeled);
    }
    return json_io::load_record(path);
}

// Accepts delineation JSON or a labeled record (scored as its own prediction).
DelineationResult load_prediction(const fs::path& path) {
    const auto text = read_text(path);
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && !doc.contains("mode") && doc.contains("leads")) {
        return reference_as_prediction(json_io::read_record(text));
    }
    return delineation_from_json(text);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// --- convert ---------------------------------------------------------------

struct ConvertArgs {
    std::string input;
    std::string output;
};

int cmd_convert(const ConvertArgs& a, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(a.input)) {
        throw UsageError("not a directory: " + a.input);
    }
    const auto headers = expand_inputs({a.input}, {".hea"});
    if (headers.empty()) {
        out << "note: no WFDB records found in " << a.input << '\n';
        return kOk;
    }
    std::vector<std::string> failures;
    std::size_t written = 0;
    for (const auto& h : headers) {
        try {
            auto loaded = load_wfdb(h);
            for (const auto& w : loaded.warnings) {
                err << "warning: " << h.filename().string() << ": " << w << '\n';
            }
            const fs::path dest = fs::path(a.output) / (loaded.labeled.record.record_id + ".json");
            write_text(dest, json_io::write_record(loaded.labeled));
            ++written;
        } catch (const std::exception& e) {
            failures.push_back(h.stem().string() + ": " + e.what());
        }
    }
    out << "converted " << written << " of " << headers.size() << " records\n";
    if (!failures.empty()) {
        err << "failed records (" << failures.size() << "):\n";
        for (const auto& f : failures) {
            err << "  " << f << '\n';
        }
        return kDataError;
    }
    return kOk;
}

// --- resample --------------------------------------------------------------

struct ResampleArgs {
    std::string input;
    std::string output;
    double rate = 0.0;
};

int cmd_resample(const ResampleArgs& a, std::ostream& out, std::ostream& err) {
    if (!fs::is_regular_file(a.input)) {
        throw UsageError("no such file: " + a.input);
    }
    const auto rec = load_labeled(a.input, err);
    const auto res = resample(rec, a.rate);
    write_text(a.output, json_io::write_record(res));
    out << rec.record.record_id << ": " << rec.record.sample_count() << " samples at " << rec.record.sampling_rate
        << " Hz -> " << res.record.sample_count() << " samples at " << res.record.sampling_rate << " Hz\n";
    return kOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out_dir;
    std::string loss_csv;
    std::string resume;
    std::string preset;
    std::string train_ids;
    std::string test_ids;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
    std::size_t iterations = 0;
    std::size_t batch_size = 0;
    double learning_rate = 0.0;
    std::size_t checkpoint_every = 0;
    std::size_t log_every = 50;
};

struct Given {
    const CLI::App* app;
    bool operator()(const char* name) const { return app->count(name) > 0; }
};

std::vector<std::string> ids_of(const std::vector<LabeledRecord>& records) {
    std::vector<std::string> ids;
    for (const auto& r : records) {
        ids.push_back(r.record.record_id);
    }
    return ids;
}

int cmd_train(TrainArgs a, const Given& given, std::ostream& out, std::ostream& err) {
    ConfigFile file;
    if (!a.config.empty()) {
        file = ConfigFile::load(a.config);
    }
    // Flags override file values.
    auto set_flag = [&](const char* flag, const char* section, const char* key, const std::string& value) {
        if (given(flag)) {
            file.set(section, key, value);
        }
    };
    set_flag("--preset", "model", "preset", a.preset);
    set_flag("--seed", "train", "seed", std::to_string(a.seed));
    set_flag("--iterations", "train", "iterations", std::to_string(a.iterations));
    set_flag("--batch-size", "train", "batch_size", std::to_string(a.batch_size));
    set_flag("--learning-rate", "train", "learning_rate", fixed(a.learning_rate, 12));
    set_flag("--checkpoint-every", "train", "checkpoint_every", std::to_string(a.checkpoint_every));
    set_flag("--out", "train", "checkpoint_dir", a.out_dir);
    set_flag("--data", "data", "root", a.data);
    set_flag("--train-ids", "data", "train_ids", a.train_ids);
    set_flag("--test-ids", "data", "test_ids", a.test_ids);
    set_flag("--train-fraction", "data", "train_fraction", fixed(a.train_fraction, 12));

    TrainConfig tc;
    tc.checkpoint_dir = "checkpoints";
    file.apply(tc);
    ModelConfig mc;
    file.apply(mc);
    mc.seed = tc.seed;
    DelineateOptions seg;
    DelineationMode mode = DelineationMode::Averaged;
    file.apply(seg, mode);

    std::string root;
    if (auto v = file.get("data", "root")) {
        root = *v;
    } else if (const char* env = std::getenv("ECG_DATA_ROOT")) {
        root = env;
    }
    if (root.empty()) {
        throw UsageError("no data root: pass --data, set [data] root or ECG_DATA_ROOT");
    }
    if (!fs::is_directory(root)) {
        throw UsageError("data root is not a directory: " + root);
    }
    if (!a.resume.empty() && !fs::is_regular_file(a.resume)) {
        throw UsageError("no such checkpoint: " + a.resume);
    }
    double fraction = 0.8;
    if (auto v = file.get("data", "train_fraction")) {
        fraction = std::stod(*v);
        if (!(fraction > 0.0 && fraction <= 1.0)) {
            throw ConfigError("[data] train_fraction must be in (0, 1]");
        }
    }

    std::vector<LabeledRecord> records;
    for (const auto& p : expand_inputs({root}, {".json", ".hea"})) {
        auto r = load_labeled(p, err);
        if (r.record.sampling_rate != seg.model_rate) {
            r = resample(r, seg.model_rate);
        }
        records.push_back(std::move(r));
    }
    if (records.empty()) {
        throw std::runtime_error("no records found under " + root);
    }

    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    if (auto v = file.get("data", "train_ids")) {
        train_ids = split_list(*v);
        if (auto t = file.get("data", "test_ids")) {
            test_ids = split_list(*t);
        }
    } else {
        auto ids = ids_of(records);
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 rng(tc.seed);
        std::shuffle(ids.begin(), ids.end(), rng);
        auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, ids.size());
        train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
        std::sort(train_ids.begin(), train_ids.end());
        std::sort(test_ids.begin(), test_ids.end());
    }
    const auto split = make_split(records, train_ids, test_ids);

    UNet model(mc);
    nn::Adam adam(tc.adam);
    if (!a.resume.empty()) {
        auto ck = load_checkpoint(fs::path(a.resume));
        if (!(ck.model.config() == mc)) {
            throw ConfigError("checkpoint " + a.resume + " was trained with a different model configuration");
        }
        model = std::move(ck.model);
        adam = ck.optimizer ? std::move(*ck.optimizer) : nn::Adam(tc.adam);
        adam.config() = tc.adam;
    }

    const fs::path dir = tc.checkpoint_dir;
    fs::create_directories(dir);
    {
        std::ostringstream s;
        s << "train:";
        for (const auto& id : train_ids) {
            s << ' ' << id;
        }
        s << "\ntest:";
        for (const auto& id : test_ids) {
            s << ' ' << id;
        }
        s << '\n';
        write_text(dir / "split.txt", s.str());
    }

    out << "training " << model.parameter_count() << " parameters on " << split.train.size() << " lead signals from "
        << train_ids.size() << " records, iterations " << model.training_step << " -> " << tc.iterations << '\n';
    const std::size_t log_every = std::max<std::size_t>(1, a.log_every);
    const auto result = train(model, adam, split, tc, [&](const TrainProgress& p) {
        if (p.iteration % log_every == 0 || p.iteration == tc.iterations) {
            out << "iteration " << p.iteration << " loss " << fixed(p.loss, 6) << '\n';
        }
    });
    for (const auto& w : result.warnings) {
        err << "warning: " << w << '\n';
    }

    // On resume, keep earlier rows so the CSV matches an uninterrupted run.
    const fs::path csv = a.loss_csv.empty() ? dir / "loss.csv" : fs::path(a.loss_csv);
    std::string history = loss_history_csv(result.history);
    if (!a.resume.empty() && fs::is_regular_file(csv)) {
        const std::uint64_t start = result.history.empty() ? model.training_step : result.history.front().iteration;
        std::istringstream old(read_text(csv));
        std::string line;
        std::string kept;
        std::getline(old, line);
        while (std::getline(old, line)) {
            if (!line.empty() && std::stoull(line.substr(0, line.find(','))) < start) {
                kept += line + '\n';
            }
        }
        const auto header_end = history.find('\n') + 1;
        history.insert(header_end, kept);
    }
    write_text(csv, history);
    save_checkpoint(dir / "model.bin", model, &adam);
    out << "wrote " << (dir / "model.bin").string() << " and " << csv.string() << '\n';
    return kOk;
}

// --- segment ---------------------------------------------------------------

struct SegmentArgs {
    std::string config;
    std::vector<std::string> inputs;
    std::string checkpoint;
    std::string out_dir;
    std::string mode;
    double min_duration_ms = 0.0;
};

int cmd_segment(const SegmentArgs& a, const Given& given, std::ostream& out, std::ostream& err) {
    ConfigFile file;
    if (!a.config.empty()) {
        file = ConfigFile::load(a.config);
    }
    if (given("--mode")) {
        file.set("segment", "mode", a.mode);
    }
    if (given("--min-duration-ms")) {
        file.set("segment", "min_duration_ms", fixed(a.min_duration_ms, 6));
    }
    DelineateOptions opts;
    DelineationMode mode = DelineationMode::Averaged;
    file.apply(opts, mode);
    if (!fs::is_regular_file(a.checkpoint)) {
        throw UsageError("no such checkpoint: " + a.checkpoint);
    }
    const auto inputs = expand_inputs(a.inputs, {".json", ".hea"});
    auto ck = load_checkpoint(fs::path(a.checkpoint));

    for (const auto& p : inputs) {
        const auto rec = load_labeled(p, err);
        const auto result = delineate(rec.record, ck.model, mode, opts);
        const fs::path dest = fs::path(a.out_dir) / (result.record_id + ".json");
        write_text(dest, delineation_to_json(result, 1));
        std::size_t waves = 0;
        for (const auto& s : result.streams) {
            waves += s.waves.size();
        }
        out << result.record_id << ": " << to_string(mode) << ", " << result.streams.size() << " stream(s), " << waves
            << " waves -> " << dest.string() << '\n';
    }
    return kOk;
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
    std::string config;
    std::vector<std::string> reference;
    std::vector<std::string> predicted;
    std::string tolerance;
    std::string csv;
    std::string text;
    std::string reference_lead;
    bool keep_edges = false;
};

int cmd_evaluate(const EvaluateArgs& a, const Given& given, std::ostream& out, std::ostream& err) {
    ConfigFile file;
    if (!a.config.empty()) {
        file = ConfigFile::load(a.config);
    }
    if (given("--tolerance")) {
        file.set("evaluate", "tolerance", a.tolerance);
    }
    if (given("--keep-edge-cycles")) {
        file.set("evaluate", "edge_exclusion", "false");
    }
    if (given("--reference-lead")) {
        file.set("evaluate", "reference_lead", a.reference_lead);
    }
    EvaluatorConfig cfg;
    file.apply(cfg);

    const auto ref_paths = expand_inputs(a.reference, {".json", ".hea"});
    const auto pred_paths = expand_inputs(a.predicted, {".json"});
    std::vector<LabeledRecord> refs;
    for (const auto& p : ref_paths) {
        refs.push_back(load_labeled(p, err));
    }
    std::vector<DelineationResult> preds;
    for (const auto& p : pred_paths) {
        preds.push_back(load_prediction(p));
    }
    const auto report = evaluate_dataset(refs, preds, cfg);
    for (const auto& w : report.warnings) {
        err << "warning: " << w << '\n';
    }
    const auto text = render_report_text(report);
    out << text;
    if (!a.csv.empty()) {
        write_text(a.csv, render_report_csv(report));
    }
    if (!a.text.empty()) {
        write_text(a.text, text);
    }
    return kOk;
}

// --- render ----------------------------------------------------------------

struct RenderArgs {
    std::string record;
    std::string delineation;
    std::string output;
};

int cmd_render(const RenderArgs& a, std::ostream& out, std::ostream& err) {
    for (const auto& p : {a.record, a.delineation}) {
        if (!p.empty() && !fs::is_regular_file(p)) {
            throw UsageError("no such file: " + p);
        }
    }
    const auto rec = load_labeled(a.record, err);
    std::optional<DelineationResult> del;
    if (!a.delineation.empty()) {
        del = load_prediction(a.delineation);
    }
    write_text(a.output, render_svg(rec.record, del ? &*del : nullptr));
    out << "wrote " << a.output << '\n';
    return kOk;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string output;
    std::size_t count = 2;
    std::uint64_t seed = 1;
    double rate = 500.0;
    double duration = 10.0;
    std::string prefix = "synth";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    std::mt19937_64 rng(a.seed);
    for (std::size_t i = 0; i < a.count; ++i) {
        synth::SyntheticConfig sc;
        char id[64];
        std::snprintf(id, sizeof id, "%s_%03zu", a.prefix.c_str(), i + 1);
        sc.record_id = id;
        sc.sampling_rate = a.rate;
        sc.duration = a.duration;
        sc.seed = rng();
        const fs::path dest = fs::path(a.output) / (sc.record_id + ".json");
        write_text(dest, json_io::write_record(synth::generate(sc)));
        out << "wrote " << dest.string() << '\n';
    }
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ECG wave delineation: convert, resample, train, segment, evaluate, render"};
    app.name("ecgseg");
    app.require_subcommand(1);

    ConvertArgs convert;
    auto* c = app.add_subcommand("convert", "Convert a directory of WFDB records to JSON");
    c->add_option("input", convert.input, "Directory with .hea/.dat and per-lead annotation files")->required();
    c->add_option("output", convert.output, "Output directory")->required();

    ResampleArgs rs;
    auto* r = app.add_subcommand("resample", "Resample a record with a natural cubic spline");
    r->add_option("input", rs.input, "Record (.json or .hea)")->required();
    r->add_option("output", rs.output, "Output JSON")->required();
    r->add_option("--rate", rs.rate, "Target sampling rate in Hz")->required()->check(CLI::PositiveNumber);

    TrainArgs ta;
    auto* t = app.add_subcommand("train", "Train the segmentation network");
    t->add_option("--config", ta.config, "INI config file")->check(CLI::ExistingFile);
    t->add_option("--data", ta.data, "Data root with .json or WFDB records (default: $ECG_DATA_ROOT)");
    t->add_option("--out", ta.out_dir, "Checkpoint directory (default: checkpoints)");
    t->add_option("--loss-csv", ta.loss_csv, "Loss history CSV (default: <out>/loss.csv)");
    t->add_option("--resume", ta.resume, "Resume from a checkpoint");
    t->add_option("--preset", ta.preset, "Model size: default or tiny");
    t->add_option("--train-ids", ta.train_ids, "Comma separated training record ids");
    t->add_option("--test-ids", ta.test_ids, "Comma separated held-out record ids");
    t->add_option("--train-fraction", ta.train_fraction, "Training share of a random split");
    t->add_option("--seed", ta.seed, "Seed for init, split and batches");
    t->add_option("--iterations", ta.iterations, "Total optimizer steps");
    t->add_option("--batch-size", ta.batch_size, "Crops per step");
    t->add_option("--learning-rate", ta.learning_rate, "Adam learning rate");
    t->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint cadence in steps (0 = final only)");
    t->add_option("--log-every", ta.log_every, "Progress cadence in steps");

    SegmentArgs sa;
    auto* s = app.add_subcommand("segment", "Delineate records with a trained checkpoint");
    s->add_option("records", sa.inputs, "Records or directories")->required();
    s->add_option("--config", sa.config, "INI config file")->check(CLI::ExistingFile);
    s->add_option("--checkpoint", sa.checkpoint, "Model checkpoint")->required();
    s->add_option("--out", sa.out_dir, "Output directory")->required();
    s->add_option("--mode", sa.mode, "per-lead, avg or lead2 (default avg)");
    s->add_option("--min-duration-ms", sa.min_duration_ms, "Drop segments shorter than this");

    EvaluateArgs ea;
    auto* e = app.add_subcommand("evaluate", "Score predictions against reference annotations");
    e->add_option("--config", ea.config, "INI config file")->check(CLI::ExistingFile);
    e->add_option("--ref", ea.reference, "Reference records or directories")->required();
    e->add_option("--pred", ea.predicted, "Delineation JSON files or directories")->required();
    e->add_option("--tolerance", ea.tolerance, "Match tolerance: 150, 150ms or 0.15s");
    e->add_option("--csv", ea.csv, "Write the metrics table as CSV");
    e->add_option("--text", ea.text, "Write the metrics table as text");
    e->add_option("--reference-lead", ea.reference_lead, "Score single-stream modes against this lead only");
    e->add_flag("--keep-edge-cycles", ea.keep_edges, "Do not exclude the unannotated first and last cycles");

    RenderArgs ra;
    auto* v = app.add_subcommand("render", "Plot a record and its delineation as SVG");
    v->add_option("record", ra.record, "Record (.json or .hea)")->required();
    v->add_option("--delineation", ra.delineation, "Delineation JSON to overlay");
    v->add_option("--out", ra.output, "Output SVG")->required();

    SynthArgs ya;
    auto* y = app.add_subcommand("synth", "Write synthetic annotated 12-lead records");
    y->add_option("output", ya.output, "Output directory")->required();
    y->add_option("--count", ya.count, "Number of records")->check(CLI::PositiveNumber);
    y->add_option("--seed", ya.seed, "Seed");
    y->add_option("--rate", ya.rate, "Sampling rate in Hz")->check(CLI::PositiveNumber);
    y->add_option("--duration", ya.duration, "Duration in seconds")->check(CLI::PositiveNumber);
    y->add_option("--prefix", ya.prefix, "Record id prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (c->parsed()) {
            return cmd_convert(convert, out, err);
        }
        if (r->parsed()) {
            return cmd_resample(rs, out, err);
        }
        if (t->parsed()) {
            return cmd_train(ta, Given{t}, out, err);
        }
        if (s->parsed()) {
            return cmd_segment(sa, Given{s}, out, err);
        }
        if (e->parsed()) {
            return cmd_evaluate(ea, Given{e}, out, err);
        }
        if (v->parsed()) {
            return cmd_render(ra, out, err);
        }
        return cmd_synth(ya, out);
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsageError;
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << '\n';
        return kUsageError;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kDataError;
    }
}

} // namespace ecgseg::cli
