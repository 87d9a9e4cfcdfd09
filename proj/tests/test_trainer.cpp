#include "ecgseg/checkpoint.h"
#include "ecgseg/errors.h"
#include "ecgseg/synthetic.h"
#include "ecgseg/trainer.h"

#include "support/temp_dir.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace ecgseg;

namespace {

std::vector<LabeledRecord> records(std::size_t n, double fs = 100.0, double duration = 3.0) {
    std::vector<LabeledRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        synth::SyntheticConfig sc;
        sc.record_id = "s" + std::to_string(i);
        sc.sampling_rate = fs;
        sc.duration = duration;
        sc.annotation_margin = 0.3;
        sc.seed = 100 + i;
        out.push_back(synth::generate(sc));
    }
    return out;
}

// Small crops so the tests run in milliseconds.
TrainConfig quick_config() {
    TrainConfig c;
    c.batch_size = 3;
    c.iterations = 6;
    c.crop_seconds = 0.64;
    c.crop_start_min = 0.5;
    c.crop_start_max = 1.5;
    c.seed = 17;
    return c;
}

} // namespace

TEST(TrainConfigTest, Validation) {
    EXPECT_NO_THROW(TrainConfig{}.validate());
    auto c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.crop_start_max = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.adam.beta1 = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.crop_seconds = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    const TrainConfig d;
    EXPECT_EQ(d.crop_seconds, 4.0);
    EXPECT_EQ(d.crop_start_min, 2.0);
    EXPECT_EQ(d.crop_start_max, 4.0);
}

TEST(Split, UsesEveryLeadAndRejectsBadIds) {
    const auto recs = records(3);
    const std::vector<std::string> train{"s0", "s2"}, test{"s1"};
    const auto split = make_split(recs, train, test);
    EXPECT_EQ(split.train.size(), 2u * 12u);
    ASSERT_EQ(split.test.size(), 1u);
    EXPECT_EQ(split.test[0].record.record_id, "s1");
    EXPECT_EQ(split.train[13].record_id, "s2");
    EXPECT_EQ(split.train[13].lead, 1u);
    EXPECT_EQ(split.train[13].mask, recs[2].mask(1));

    const std::vector<std::string> overlap{"s1"};
    EXPECT_THROW(make_split(recs, overlap, test), ConfigError);
    const std::vector<std::string> unknown{"nope"};
    EXPECT_THROW(make_split(recs, unknown, test), ConfigError);
}

TEST(Crop, StartWindowLengthAndAlignment) {
    const auto recs = records(1, 500.0, 10.0);
    const auto split = make_split(recs, std::vector<std::string>{"s0"}, {});
    const TrainConfig cfg;  // 4 s crops starting in [2, 4] s
    std::mt19937_64 rng(1);
    std::size_t lo = 1 << 30, hi = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto s = augment_crop(split.train[0], cfg, rng);
        ASSERT_TRUE(s);
        ASSERT_EQ(s->signal.size(), 2000u);
        ASSERT_EQ(s->mask.size(), 2000u);
        ASSERT_GE(s->crop_start, 1000u);
        ASSERT_LE(s->crop_start, 2000u);
        lo = std::min(lo, s->crop_start);
        hi = std::max(hi, s->crop_start);
        EXPECT_EQ(s->signal[7], split.train[0].samples[s->crop_start + 7]);
        EXPECT_EQ(s->mask[1999], split.train[0].mask[s->crop_start + 1999]);
    }
    EXPECT_LT(lo, 1020u);
    EXPECT_GT(hi, 1980u);

    const auto short_recs = records(1, 500.0, 7.0);
    const auto ss = make_split(short_recs, std::vector<std::string>{"s0"}, {});
    EXPECT_FALSE(crop_fits(ss.train[0], cfg));
    EXPECT_FALSE(augment_crop(ss.train[0], cfg, rng));
}

TEST(Batches, DependOnlyOnSeedAndIteration) {
    const auto recs = records(2);
    const auto split = make_split(recs, std::vector<std::string>{"s0", "s1"}, {});
    const auto cfg = quick_config();
    const auto a = draw_batch(split.train, cfg, 4);
    const auto b = draw_batch(split.train, cfg, 4);
    EXPECT_EQ(a.input, b.input);
    EXPECT_EQ(a.masks, b.masks);
    EXPECT_EQ(a.input.batch(), 3u);
    EXPECT_EQ(a.input.length(), 64u);
    const auto c = draw_batch(split.train, cfg, 5);
    EXPECT_FALSE(a.input == c.input);
    auto other = cfg;
    other.seed = 18;
    EXPECT_FALSE(a.input == draw_batch(split.train, other, 4).input);
    EXPECT_THROW(draw_batch({}, cfg, 0), ConfigError);
}

TEST(Training, DeterministicUnderFixedSeed) {
    const auto recs = records(2);
    const auto split = make_split(recs, std::vector<std::string>{"s0", "s1"}, {});
    const auto cfg = quick_config();
    UNet m1(ModelConfig::tiny()), m2(ModelConfig::tiny());
    nn::Adam a1(cfg.adam), a2(cfg.adam);
    const auto r1 = train(m1, a1, split, cfg);
    const auto r2 = train(m2, a2, split, cfg);
    ASSERT_EQ(r1.history.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(r1.history[i].iteration, i + 1);
        EXPECT_EQ(r1.history[i].loss, r2.history[i].loss);
    }
    const auto p1 = m1.parameters(), p2 = m2.parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) {
        EXPECT_EQ(p1[i]->value, p2[i]->value);
    }
    EXPECT_EQ(m1.training_step, 6u);
}

TEST(Training, ResumedRunMatchesUninterrupted) {
    testutil::TempDir dir;
    const auto recs = records(2);
    const auto split = make_split(recs, std::vector<std::string>{"s0", "s1"}, {});
    auto cfg = quick_config();

    UNet full(ModelConfig::tiny());
    nn::Adam full_opt(cfg.adam);
    const auto full_run = train(full, full_opt, split, cfg);

    auto first = cfg;
    first.iterations = 3;
    first.checkpoint_every = 3;
    first.checkpoint_dir = dir.path();
    UNet part(ModelConfig::tiny());
    nn::Adam part_opt(cfg.adam);
    train(part, part_opt, split, first);
    ASSERT_TRUE(std::filesystem::exists(dir / "checkpoint_3.bin"));
    ASSERT_TRUE(std::filesystem::exists(dir / "latest.bin"));

    auto ck = load_checkpoint(dir / "latest.bin");
    ASSERT_TRUE(ck.optimizer);
    EXPECT_EQ(ck.model.training_step, 3u);
    const auto rest = train(ck.model, *ck.optimizer, split, cfg);
    ASSERT_EQ(rest.history.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(rest.history[i].iteration, full_run.history[i + 3].iteration);
        EXPECT_EQ(rest.history[i].loss, full_run.history[i + 3].loss);
    }
    const auto p1 = full.parameters(), p2 = ck.model.parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) {
        EXPECT_EQ(p1[i]->value, p2[i]->value) << p1[i]->name;
    }
}

TEST(Training, LossDecreasesOnRepeatedData) {
    const auto recs = records(1);
    const auto split = make_split(recs, std::vector<std::string>{"s0"}, {});
    auto cfg = quick_config();
    cfg.iterations = 40;
    cfg.adam.learning_rate = 3e-3;
    UNet m(ModelConfig::tiny());
    nn::Adam opt(cfg.adam);
    std::size_t calls = 0;
    const auto r = train(m, opt, split, cfg, [&](const TrainProgress&) { ++calls; });
    EXPECT_EQ(calls, 40u);
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 5; ++i) {
        early += r.history[i].loss;
        late += r.history[35 + i].loss;
    }
    EXPECT_LT(late, 0.8 * early);
}

TEST(Training, NonFiniteLossNamesTheBatch) {
    auto recs = records(1);
    for (auto& s : recs[0].record.signals) {
        std::fill(s.begin(), s.end(), std::numeric_limits<double>::quiet_NaN());
    }
    const auto split = make_split(recs, std::vector<std::string>{"s0"}, {});
    UNet m(ModelConfig::tiny());
    nn::Adam opt;
    try {
        train(m, opt, split, quick_config());
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("iteration 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("s0/"), std::string::npos) << msg;
    }
}

TEST(Training, ShortSignalsAreSkippedWithWarning) {
    auto recs = records(2);
    recs.push_back(records(1, 100.0, 1.0)[0]);
    recs.back().record.record_id = "short";
    const auto split = make_split(recs, std::vector<std::string>{"s0", "short"}, {});
    auto cfg = quick_config();
    cfg.iterations = 1;
    UNet m(ModelConfig::tiny());
    nn::Adam opt;
    const auto r = train(m, opt, split, cfg);
    EXPECT_EQ(r.warnings.size(), 12u);
}

TEST(LossCsv, Format) {
    const std::vector<TrainProgress> h{{1, 1.5}, {2, 0.25}};
    EXPECT_EQ(loss_history_csv(h), "iteration,loss\n1,1.5\n2,0.25\n");
}
