#include "ecgseg/config_file.h"
#include "ecgseg/errors.h"
#include "ecgseg/svg.h"

#include "support/temp_dir.h"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace ecgseg;

namespace {

std::string read_data(const std::string& name) {
    std::ifstream in(std::string(ECGSEG_TEST_DATA) + "/" + name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 4 samples at 10 Hz; with the options below one sample is one pixel and
// one millivolt is ten.
EcgRecord svg_record() {
    EcgRecord r;
    r.record_id = "g";
    r.sampling_rate = 10.0;
    r.leads = {"i", "a<b"};
    r.signals = {{0.0, 0.5, -0.5, 2.0}, {0.0, 0.0, 0.0, 0.0}};
    return r;
}

SvgOptions svg_options() { return {10.0, 20.0, 2.0}; }

} // namespace

TEST(Svg, MatchesGolden) {
    DelineationResult d;
    d.record_id = "g";
    d.mode = DelineationMode::PerLead;
    d.sampling_rate = 10.0;
    d.streams = {{"A<B", {{WaveType::Qrs, 1, 2}}}, {"i", {{WaveType::P, 0, 0}}}};
    EXPECT_EQ(render_svg(svg_record(), &d, svg_options()), read_data("svg_golden.svg"));
}

TEST(Svg, NoDelineationGivesPlainTraces) {
    const auto svg = render_svg(svg_record(), nullptr, svg_options());
    EXPECT_EQ(svg.find("fill-opacity"), std::string::npos);
    EXPECT_NE(svg.find("<g id=\"lead-i\">"), std::string::npos);
    DelineationResult empty;
    empty.mode = DelineationMode::Averaged;
    EXPECT_EQ(render_svg(svg_record(), &empty, svg_options()), svg);
}

TEST(Svg, SingleStreamDrawsOnEveryLead) {
    DelineationResult d;
    d.mode = DelineationMode::Averaged;
    d.streams = {{"avg", {{WaveType::T, 0, 3}}}};
    const auto svg = render_svg(svg_record(), &d, svg_options());
    std::size_t count = 0;
    for (auto p = svg.find("#20a040"); p != std::string::npos; p = svg.find("#20a040", p + 1)) {
        ++count;
    }
    EXPECT_EQ(count, 2u);
}

TEST(Duration, UnitsAgree) {
    EXPECT_EQ(parse_duration_ms("150"), 150.0);
    EXPECT_EQ(parse_duration_ms("150ms"), 150.0);
    EXPECT_EQ(parse_duration_ms(" 150 ms "), 150.0);
    EXPECT_EQ(parse_duration_ms("0.15s"), 150.0);
    EXPECT_EQ(parse_duration_ms("0.15S"), 150.0);
    for (const char* bad : {"", "s", "ms", "-5", "0", "abc", "15m", "1.5.0s"}) {
        EXPECT_THROW(parse_duration_ms(bad), ConfigError) << bad;
    }
}

TEST(SplitList, CommasAndSpaces) {
    EXPECT_EQ(split_list("1, 2 ,3  4"), (std::vector<std::string>{"1", "2", "3", "4"}));
    EXPECT_TRUE(split_list(" , ").empty());
}

TEST(Config, ParsesAllSections) {
    const auto cfg = ConfigFile::parse(R"(
# comment
; other comment
[data]
root = /data/ludb
train_ids = 1, 2, 3

[model]
preset = tiny
bottleneck = 32

[train]
batch_size = 8
iterations = 300
learning_rate = 0.002
seed = 9
crop_seconds = 2

[segment]
mode = lead2
min_duration_ms = 20

[evaluate]
tolerance = 0.1s
edge_exclusion = no
sigma = sample
reference_lead = II
)");
    EXPECT_EQ(cfg.get("data", "root"), "/data/ludb");
    EXPECT_EQ(split_list(*cfg.get("data", "train_ids")).size(), 3u);
    EXPECT_FALSE(cfg.get("data", "test_ids"));

    ModelConfig m;
    m.seed = 9;
    cfg.apply(m);
    EXPECT_EQ(m.encoder_widths, ModelConfig::tiny().encoder_widths);
    EXPECT_EQ(m.bottleneck_width, 32u);
    EXPECT_EQ(m.seed, 9u);

    TrainConfig t;
    cfg.apply(t);
    EXPECT_EQ(t.batch_size, 8u);
    EXPECT_EQ(t.iterations, 300u);
    EXPECT_EQ(t.adam.learning_rate, 0.002);
    EXPECT_EQ(t.adam.beta1, 0.9);
    EXPECT_EQ(t.seed, 9u);
    EXPECT_EQ(t.crop_seconds, 2.0);

    DelineateOptions s;
    auto mode = DelineationMode::Averaged;
    cfg.apply(s, mode);
    EXPECT_EQ(mode, DelineationMode::LeadII);
    EXPECT_EQ(s.min_duration_ms, 20.0);
    EXPECT_EQ(s.model_rate, 500.0);

    EvaluatorConfig e;
    cfg.apply(e);
    EXPECT_EQ(e.tolerance_ms, 100.0);
    EXPECT_FALSE(e.exclude_edge_cycles);
    EXPECT_EQ(e.sigma, SigmaConvention::Sample);
    EXPECT_EQ(e.reference_lead, "II");
}

TEST(Config, RejectsUnknownAndMalformed) {
    EXPECT_THROW(ConfigFile::parse("[trainer]\nseed = 1\n"), ConfigError);
    EXPECT_THROW(ConfigFile::parse("[train]\nsed = 1\n"), ConfigError);
    EXPECT_THROW(ConfigFile::parse("[train\nseed = 1\n"), ConfigError);
    EXPECT_THROW(ConfigFile::parse("seed = 1\n"), ConfigError);

    TrainConfig t;
    EXPECT_THROW(ConfigFile::parse("[train]\nbatch_size = -1\n").apply(t), ConfigError);
    EXPECT_THROW(ConfigFile::parse("[train]\nlearning_rate = fast\n").apply(t), ConfigError);
    EXPECT_THROW(ConfigFile::parse("[train]\ncrop_start_min = 5\n").apply(t), ConfigError);
    ModelConfig m;
    EXPECT_THROW(ConfigFile::parse("[model]\npreset = huge\n").apply(m), ConfigError);
    EXPECT_THROW(ConfigFile::parse("[model]\nwidths = 1 2 3\n").apply(m), ConfigError);
    EvaluatorConfig e;
    EXPECT_THROW(ConfigFile::parse("[evaluate]\nsigma = n-1\n").apply(e), ConfigError);
    EXPECT_THROW(ConfigFile::parse("[evaluate]\nedge_exclusion = maybe\n").apply(e), ConfigError);
    DelineateOptions s;
    auto mode = DelineationMode::Averaged;
    EXPECT_THROW(ConfigFile::parse("[segment]\nmode = mean\n").apply(s, mode), ConfigError);

    try {
        ConfigFile::parse("[train]\nsed = 1\n");
    } catch (const ConfigError& err) {
        EXPECT_NE(std::string(err.what()).find("[train] sed"), std::string::npos) << err.what();
    }
}

TEST(Config, SetOverridesFileValues) {
    auto cfg = ConfigFile::parse("[train]\niterations = 10\n");
    cfg.set("train", "iterations", " 20 ");
    TrainConfig t;
    cfg.apply(t);
    EXPECT_EQ(t.iterations, 20u);
    EXPECT_THROW(cfg.set("train", "nope", "1"), ConfigError);
}

TEST(Config, LoadFromFile) {
    testutil::TempDir dir;
    {
        std::ofstream(dir / "c.ini") << "[evaluate]\ntolerance = 150ms\n";
    }
    EvaluatorConfig e;
    e.tolerance_ms = 1.0;
    ConfigFile::load(dir / "c.ini").apply(e);
    EXPECT_EQ(e.tolerance_ms, 150.0);
    EXPECT_THROW(ConfigFile::load(dir / "missing.ini"), ConfigError);
}
