#include "ecgseg/errors.h"
#include "ecgseg/layers.h"

#include "support/gradcheck.h"
#include "support/oracles.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ecgseg;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
    EXPECT_TRUE(a.same_shape(b)) << a.shape_string() << " vs " << b.shape_string();
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
    }
    return d;
}

} // namespace

TEST(TensorTest, ShapeAndLayout) {
    Tensor t(2, 3, 4, 1.5);
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.shape_string(), "(2, 3, 4)");
    t(1, 2, 3) = 7.0;
    EXPECT_EQ(t.values().back(), 7.0);
    EXPECT_EQ(t.row(1, 2)[3], 7.0);
    EXPECT_THROW(Tensor(0, 1, 1), ShapeError);
    EXPECT_THROW(Tensor(1, 1, 0), ShapeError);
}

TEST(Conv1d, MatchesNaiveOracle) {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t b = gradcheck::pick(rng, 1, 3), ci = gradcheck::pick(rng, 1, 5);
        const std::size_t co = gradcheck::pick(rng, 1, 5), k = gradcheck::pick(rng, 1, 9);
        const std::size_t pad = gradcheck::pick(rng, 0, 4);
        const std::size_t l = gradcheck::pick(rng, k > 2 * pad ? k - 2 * pad : 1, 30);
        const Tensor x = oracle::random_tensor(rng, b, ci, l);
        const Tensor w = oracle::random_tensor(rng, co, ci, k);
        const Tensor bias = oracle::random_tensor(rng, 1, 1, co);
        ASSERT_LT(max_abs_diff(nn::conv1d(x, w, bias, pad), oracle::conv1d(x, w, bias, pad)), 1e-10) << trial;
    }
}

TEST(Conv1d, HandComputed) {
    Tensor x(1, 1, 4);
    x(0, 0, 0) = 1;
    x(0, 0, 1) = 2;
    x(0, 0, 2) = 3;
    x(0, 0, 3) = 4;
    Tensor w(1, 1, 3);
    w(0, 0, 0) = 1;
    w(0, 0, 1) = 0;
    w(0, 0, 2) = -1;
    Tensor b(1, 1, 1, 0.5);
    const Tensor y = nn::conv1d(x, w, b, 1);
    // Cross-correlation: y[t] = x[t-1] - x[t+1] + 0.5
    EXPECT_DOUBLE_EQ(y(0, 0, 0), -1.5);
    EXPECT_DOUBLE_EQ(y(0, 0, 1), -1.5);
    EXPECT_DOUBLE_EQ(y(0, 0, 2), -1.5);
    EXPECT_DOUBLE_EQ(y(0, 0, 3), 3.5);
}

TEST(Conv1d, ShapeErrors) {
    const Tensor x(1, 2, 5);
    EXPECT_THROW(nn::conv1d(x, Tensor(3, 1, 3), Tensor(1, 1, 3), 1), ShapeError);
    EXPECT_THROW(nn::conv1d(x, Tensor(3, 2, 3), Tensor(1, 1, 2), 1), ShapeError);
    EXPECT_THROW(nn::conv1d(x, Tensor(3, 2, 9), Tensor(1, 1, 3), 0), ShapeError);
}

TEST(ConvTranspose1d, MatchesNaiveOracle) {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t b = gradcheck::pick(rng, 1, 3), ci = gradcheck::pick(rng, 1, 5);
        const std::size_t co = gradcheck::pick(rng, 1, 5), stride = gradcheck::pick(rng, 1, 3);
        const std::size_t pad = gradcheck::pick(rng, 0, 3), k = gradcheck::pick(rng, 2 * pad / stride + 1, 9);
        const std::size_t l = gradcheck::pick(rng, 1, 20);
        if ((l - 1) * stride + k <= 2 * pad) {
            continue;
        }
        const Tensor x = oracle::random_tensor(rng, b, ci, l);
        const Tensor w = oracle::random_tensor(rng, ci, co, k);
        const Tensor bias = oracle::random_tensor(rng, 1, 1, co);
        ASSERT_LT(max_abs_diff(nn::convtranspose1d(x, w, bias, stride, pad),
                               oracle::convtranspose1d(x, w, bias, stride, pad)),
                  1e-10)
            << trial;
    }
}

TEST(ConvTranspose1d, DoublesLengthWithNetworkSettings) {
    const Tensor x(2, 3, 7, 1.0);
    const Tensor y = nn::convtranspose1d(x, Tensor(3, 5, 8, 0.1), Tensor(1, 1, 5), 2, 3);
    EXPECT_EQ(y.length(), 14u);
    EXPECT_EQ(y.channels(), 5u);
}

TEST(Relu, ForwardAndBackward) {
    Tensor x(1, 1, 4);
    x(0, 0, 0) = -1;
    x(0, 0, 1) = 0;
    x(0, 0, 2) = 2;
    x(0, 0, 3) = -0.5;
    const Tensor y = nn::relu(x);
    EXPECT_EQ(y(0, 0, 0), 0.0);
    EXPECT_EQ(y(0, 0, 2), 2.0);
    const Tensor g = nn::relu_backward(x, Tensor(1, 1, 4, 3.0));
    EXPECT_EQ(g(0, 0, 0), 0.0);
    EXPECT_EQ(g(0, 0, 1), 0.0);
    EXPECT_EQ(g(0, 0, 2), 3.0);
    EXPECT_TRUE(std::isnan(nn::relu(Tensor(1, 1, 1, std::nan("")))(0, 0, 0)));
}

TEST(MaxPool1d, FloorsOddLengthsAndRoutesGradient) {
    Tensor x(1, 1, 5);
    const double v[] = {1, 3, 5, 2, 9};
    for (int i = 0; i < 5; ++i) {
        x(0, 0, i) = v[i];
    }
    const auto p = nn::maxpool1d(x);
    ASSERT_EQ(p.output.length(), 2u);
    EXPECT_EQ(p.output(0, 0, 0), 3.0);
    EXPECT_EQ(p.output(0, 0, 1), 5.0);
    Tensor dy(1, 1, 2);
    dy(0, 0, 0) = 10;
    dy(0, 0, 1) = 20;
    const Tensor dx = nn::maxpool1d_backward(dy, p.argmax, 5);
    EXPECT_EQ(dx(0, 0, 1), 10.0);
    EXPECT_EQ(dx(0, 0, 2), 20.0);
    EXPECT_EQ(dx(0, 0, 4), 0.0);
    EXPECT_THROW(nn::maxpool1d(Tensor(1, 1, 1)), ShapeError);
}

TEST(BatchNorm1d, NormalizesAndTracksRunningStats) {
    Tensor x(2, 1, 2);
    x(0, 0, 0) = 1;
    x(0, 0, 1) = 2;
    x(1, 0, 0) = 3;
    x(1, 0, 1) = 6;
    nn::BatchNormState st("bn", 1);
    const Tensor y = nn::batchnorm1d(x, st);
    // mean 3, biased variance 3.5
    const double s = std::sqrt(3.5 + 1e-5);
    EXPECT_NEAR(y(0, 0, 0), -2.0 / s, 1e-12);
    EXPECT_NEAR(y(1, 0, 1), 3.0 / s, 1e-12);
    EXPECT_NEAR(st.running_mean[0], 0.3, 1e-12);
    EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * 3.5, 1e-12);

    st.training = false;
    const Tensor z = nn::batchnorm1d(x, st);
    EXPECT_NEAR(z(0, 0, 0), (1.0 - 0.3) / std::sqrt(1.25 + 1e-5), 1e-12);
    EXPECT_NEAR(st.running_mean[0], 0.3, 1e-15);  // unchanged in inference
    const Tensor zi = nn::batchnorm1d_inference(x, st);
    EXPECT_EQ(zi, z);
}

TEST(ZeroPadConcat, SkipChannelsFirstAndZeroTail) {
    const Tensor up(1, 1, 2, 5.0);
    const Tensor skip(1, 2, 3, 1.0);
    const Tensor y = nn::zero_pad_concat(up, skip);
    ASSERT_EQ(y.channels(), 3u);
    ASSERT_EQ(y.length(), 3u);
    EXPECT_EQ(y(0, 0, 2), 1.0);
    EXPECT_EQ(y(0, 2, 0), 5.0);
    EXPECT_EQ(y(0, 2, 2), 0.0);
    EXPECT_THROW(nn::zero_pad_concat(Tensor(1, 1, 4), skip), ShapeError);
}

TEST(PadCrop, RightSide) {
    Tensor x(1, 2, 3, 2.0);
    const Tensor p = nn::pad_right(x, 5);
    EXPECT_EQ(p.length(), 5u);
    EXPECT_EQ(p(0, 1, 2), 2.0);
    EXPECT_EQ(p(0, 1, 4), 0.0);
    EXPECT_EQ(nn::crop_right(p, 3), x);
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogFour) {
    const Tensor logits(2, 4, 3, 0.7);
    const std::vector<SegmentationMask> masks(2, SegmentationMask{Label::None, Label::Qrs, Label::T});
    const auto r = nn::softmax_cross_entropy(logits, masks);
    EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
    // (p - onehot) / (B*l)
    EXPECT_NEAR(r.grad(0, 2, 1), (0.25 - 1.0) / 6.0, 1e-12);
    EXPECT_NEAR(r.grad(1, 0, 1), 0.25 / 6.0, 1e-12);
}

TEST(SoftmaxCrossEntropy, StableForLargeLogits) {
    Tensor logits(1, 4, 1);
    logits(0, 0, 0) = 1000.0;
    const std::vector<SegmentationMask> masks{SegmentationMask{Label::P}};
    const auto r = nn::softmax_cross_entropy(logits, masks);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_NEAR(r.loss, 1000.0, 1e-9);
    EXPECT_THROW(nn::softmax_cross_entropy(Tensor(1, 3, 1), masks), ShapeError);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, CentralDifferences) {
    const auto check = gradcheck::all_checks()[static_cast<std::size_t>(GetParam())];
    std::mt19937_64 rng(1000 + GetParam());
    for (int shape = 0; shape < 6; ++shape) {
        const auto r = check(rng);
        EXPECT_LT(r.rel_err, 1e-4) << r.layer << " " << r.shape;
    }
}

std::string layer_name(const ::testing::TestParamInfo<int>& info) {
    static const char* names[] = {"conv1d", "batchnorm1d", "relu", "maxpool1d", "convtranspose1d", "zero_pad_concat",
                                  "loss"};
    return names[info.param];
}

INSTANTIATE_TEST_SUITE_P(Layers, GradientCheck, ::testing::Range(0, 7), layer_name);
