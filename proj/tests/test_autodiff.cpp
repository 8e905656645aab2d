#include <gtest/gtest.h>

#include <cmath>

#include "ctxnet/autodiff.hpp"
#include "test_util.hpp"

using namespace ctxnet;
using ctxnet::testing::grad_check;
using ctxnet::testing::random_tensor;
using ctxnet::testing::weighted_sum;

namespace {

ad::Tensord eye(std::size_t n, bool rg = false) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    return ad::Tensord::from({n, n}, v, rg);
}

}  // namespace

TEST(Affine, IdentityTimesIdentity) {
    auto b = ad::Tensord::zeros({2});
    auto y = ad::affine(eye(2), eye(2), b);
    EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()), (std::vector<double>{1, 0, 0, 1}));
}

TEST(Affine, WeightGradientOfSumIsColumnSumsOfInput) {
    Rng rng(3);
    auto x = random_tensor(rng, {5, 4}, -1, 1, false);
    auto w = random_tensor(rng, {4, 3});
    auto b = random_tensor(rng, {3});
    ad::backward(ad::sum(ad::affine(x, w, b)));
    for (std::size_t k = 0; k < 4; ++k) {
        double colsum = 0;
        for (std::size_t i = 0; i < 5; ++i) colsum += x.at(i, k);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(w.grad()[k * 3 + j], colsum, 1e-12);
    }
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(b.grad()[j], 5.0);
}

TEST(Affine, ShapeMismatchThrows) {
    Rng rng(1);
    auto x = random_tensor(rng, {2, 3});
    auto w = random_tensor(rng, {4, 2});
    auto b = random_tensor(rng, {2});
    try {
        ad::affine(x, w, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), "shape");
    }
}

TEST(Affine, FiniteDifferences) {
    Rng rng(11);
    auto x = random_tensor(rng, {5, 4});
    auto w = random_tensor(rng, {4, 3});
    auto b = random_tensor(rng, {3});
    auto r = grad_check({x, w, b}, [&] { return weighted_sum(ad::affine(x, w, b), 7); });
    EXPECT_LT(r.max_rel_err, 1e-4);
    EXPECT_EQ(r.checked, 20u + 12u + 3u);
}

TEST(Sigmoid, ValuesAndBounds) {
    auto x = ad::Tensord::from({1, 4}, {0.0, 50.0, -50.0, 3.0});
    auto s = ad::sigmoid(x);
    EXPECT_DOUBLE_EQ(s.value()[0], 0.5);
    for (double v : s.value()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    auto xf = ad::Tensorf::from({1, 2}, {80.0f, -80.0f});
    auto sf = ad::sigmoid(xf);
    EXPECT_TRUE(std::isfinite(sf.value()[0]) && std::isfinite(sf.value()[1]));
}

TEST(Sigmoid, FiniteDifferences) {
    Rng rng(2);
    auto x = random_tensor(rng, {6, 5}, -4, 4);
    EXPECT_LT(grad_check({x}, [&] { return weighted_sum(ad::sigmoid(x), 1); }).max_rel_err, 1e-4);
}

TEST(Relu, SubgradientAtZeroIsZero) {
    auto x = ad::Tensord::from({1, 3}, {-1.0, 0.0, 2.0}, true);
    ad::backward(ad::sum(ad::relu(x)));
    EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{0, 0, 1}));
}

TEST(Relu, FiniteDifferences) {
    Rng rng(5);
    auto x = random_tensor(rng, {6, 5});
    auto r = grad_check({x}, [&] { return weighted_sum(ad::relu(x), 2); });
    EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(SegmentMax, SingleRowIsIdentity) {
    auto x = ad::Tensord::from({1, 3}, {1, -2, 3});
    auto y = ad::segment_max(x, ad::Segments::single(1));
    EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()), (std::vector<double>{1, -2, 3}));
}

TEST(SegmentMax, ColumnwiseMax) {
    auto x = ad::Tensord::from({2, 2}, {1, 5, 3, 2});
    auto y = ad::segment_max(x, ad::Segments::single(2));
    EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()), (std::vector<double>{3, 5}));
}

TEST(SegmentMax, TiesRouteToEarliestRow) {
    auto x = ad::Tensord::from({3, 1}, {2, 2, 2}, true);
    ad::backward(ad::sum(ad::segment_max(x, ad::Segments::single(3))));
    EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 0, 0}));
}

TEST(SegmentMax, EmptySegmentIsArgumentError) {
    auto x = ad::Tensord::from({2, 1}, {1, 2});
    ad::Segments seg{{0, 0}, 2};
    try {
        ad::segment_max(x, seg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), "argument");
    }
}

TEST(SegmentMax, MatchesBruteForceAndFiniteDifferences) {
    Rng rng(9);
    auto x = random_tensor(rng, {64, 8});
    ad::Segments seg;
    seg.count = 8;
    for (std::size_t i = 0; i < 64; ++i) seg.ids.push_back(static_cast<std::uint32_t>(rng.below(8)));
    for (std::uint32_t s = 0; s < 8; ++s) seg.ids[s] = s;  // no empty segment
    auto y = ad::segment_max(x, seg);
    for (std::size_t s = 0; s < 8; ++s)
        for (std::size_t j = 0; j < 8; ++j) {
            double m = -1e300;
            for (std::size_t i = 0; i < 64; ++i)
                if (seg.ids[i] == s) m = std::max(m, x.at(i, j));
            EXPECT_EQ(y.at(s, j), m);
        }
    EXPECT_LT(grad_check({x}, [&] { return weighted_sum(ad::segment_max(x, seg), 4); }).max_rel_err, 1e-4);
}

TEST(ConcatCols, ColumnsInArgumentOrder) {
    auto a = ad::Tensord::from({2, 2}, {1, 2, 3, 4});
    auto b = ad::Tensord::from({2, 3}, {5, 6, 7, 8, 9, 10});
    auto c = ad::concat_cols<double>({a, b});
    EXPECT_EQ(c.shape(), (ad::Extents{2, 5}));
    EXPECT_EQ(std::vector<double>(c.value().begin(), c.value().end()),
              (std::vector<double>{1, 2, 5, 6, 7, 3, 4, 8, 9, 10}));
}

TEST(ConcatCols, RowMismatchIsShapeError) {
    auto a = ad::Tensord::zeros({2, 2});
    auto b = ad::Tensord::zeros({3, 2});
    EXPECT_THROW(ad::concat_cols<double>({a, b}), Error);
}

TEST(BroadcastRows, InverseOfSegmentMaxOnRegionRows) {
    Rng rng(4);
    auto r = random_tensor(rng, {4, 3});
    auto seg = ad::Segments::contiguous(16, 4);
    auto back = ad::segment_max(ad::broadcast_rows(r, seg), seg);
    EXPECT_EQ(std::vector<double>(back.value().begin(), back.value().end()),
              std::vector<double>(r.value().begin(), r.value().end()));
}

TEST(BroadcastRows, ConcatChainFiniteDifferences) {
    Rng rng(8);
    auto r = random_tensor(rng, {3, 2});
    auto p = random_tensor(rng, {9, 4});
    ad::Segments seg{{0, 1, 2, 2, 1, 0, 0, 1, 2}, 3};
    auto f = [&] { return weighted_sum(ad::concat_cols<double>({p, ad::broadcast_rows(r, seg), p}), 3); };
    EXPECT_LT(grad_check({r, p}, f).max_rel_err, 1e-4);
}

TEST(RowwiseSoftmax, ZerosGiveUniformRows) {
    auto y = ad::rowwise_softmax(ad::Tensord::zeros({3, 3}));
    for (double v : y.value()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(RowwiseSoftmax, ShiftInvariantAndStable) {
    Rng rng(6);
    auto x = random_tensor(rng, {4, 4}, -3, 3, false);
    std::vector<double> shifted(x.value().begin(), x.value().end());
    for (std::size_t j = 0; j < 4; ++j) shifted[4 + j] += 1000.0;
    auto a = ad::rowwise_softmax(x);
    auto b = ad::rowwise_softmax(ad::Tensord::from({4, 4}, shifted));
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(a.value()[i], b.value()[i], 1e-9);
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 4; ++j) s += b.at(i, j);
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(RowwiseSoftmax, FiniteDifferences) {
    Rng rng(12);
    auto x = random_tensor(rng, {5, 5}, -2, 2);
    EXPECT_LT(grad_check({x}, [&] { return weighted_sum(ad::rowwise_softmax(x), 9); }).max_rel_err, 1e-4);
}

TEST(Dropout, InferenceIsIdentity) {
    Rng rng(1);
    auto x = random_tensor(rng, {4, 4});
    auto y = ad::dropout(x, 0.5, false, 42);
    EXPECT_EQ(y.node(), x.node());
}

TEST(Dropout, RateOutOfRangeIsArgumentError) {
    auto x = ad::Tensord::zeros({1, 1});
    EXPECT_THROW(ad::dropout(x, 1.0, true, 0), Error);
    EXPECT_THROW(ad::dropout(x, -0.1, true, 0), Error);
}

TEST(Dropout, InvertedScalingAndFiniteDifferences) {
    auto ones = ad::Tensord::from({100, 100}, std::vector<double>(10000, 1.0));
    auto y = ad::dropout(ones, 0.5, true, 3);
    std::size_t kept = 0;
    for (double v : y.value()) {
        EXPECT_TRUE(v == 0.0 || v == 2.0);
        kept += v != 0.0;
    }
    EXPECT_NEAR(static_cast<double>(kept) / 10000.0, 0.5, 0.03);
    Rng rng(2);
    auto x = random_tensor(rng, {5, 4});
    EXPECT_LT(grad_check({x}, [&] { return weighted_sum(ad::dropout(x, 0.3, true, 17), 1); }).max_rel_err, 1e-4);
}

TEST(CrossEntropy, ConfidentLogitsGiveNearZeroLoss) {
    auto logits = ad::Tensord::from({2, 3}, {100, 0, 0, 0, 0, 100});
    std::vector<std::uint32_t> labels{0, 2};
    EXPECT_NEAR(ad::cross_entropy(logits, labels).item(), 0.0, 1e-12);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
    auto logits = ad::Tensord::zeros({3, 4});
    std::vector<std::uint32_t> labels{0, 1, 3};
    EXPECT_NEAR(ad::cross_entropy(logits, labels).item(), std::log(4.0), 1e-12);
}

TEST(CrossEntropy, FiniteDifferencesWithAndWithoutWeights) {
    Rng rng(13);
    auto x = random_tensor(rng, {6, 4}, -3, 3);
    std::vector<std::uint32_t> labels{0, 1, 2, 3, 1, 2};
    std::vector<double> weights{1.0, 2.0, 0.5, 1.5};
    EXPECT_LT(grad_check({x}, [&] { return ad::cross_entropy(x, labels); }).max_rel_err, 1e-4);
    EXPECT_LT(grad_check({x}, [&] { return ad::cross_entropy(x, labels, weights); }).max_rel_err, 1e-4);
}

TEST(Matmul, TransposeChainFiniteDifferences) {
    Rng rng(14);
    auto a = random_tensor(rng, {4, 3});
    auto b = random_tensor(rng, {3, 5});
    EXPECT_LT(grad_check({a, b}, [&] { return weighted_sum(ad::matmul(a, b), 5); }).max_rel_err, 1e-4);
    EXPECT_LT(grad_check({a}, [&] { return weighted_sum(ad::matmul(a, ad::transpose(a)), 6); }).max_rel_err, 1e-4);
}

TEST(Graph, SharedInputAccumulatesLikeDuplicatedInput) {
    Rng rng(21);
    auto x = random_tensor(rng, {3, 3});
    ad::backward(weighted_sum(ad::mul(ad::sigmoid(x), x), 1));
    const std::vector<double> shared(x.grad().begin(), x.grad().end());

    // same expression with two independent copies, then summed gradients
    auto x1 = x.detach(true), x2 = x.detach(true);
    ad::backward(weighted_sum(ad::mul(ad::sigmoid(x1), x2), 1));
    for (std::size_t i = 0; i < shared.size(); ++i) EXPECT_NEAR(shared[i], x1.grad()[i] + x2.grad()[i], 1e-14);
}

TEST(Graph, LeafGradientsAccumulateAcrossBackwardCalls) {
    auto x = ad::Tensord::from({1, 2}, {1, 2}, true);
    ad::backward(ad::sum(x));
    ad::backward(ad::sum(x));
    EXPECT_EQ(x.grad()[0], 2.0);
    x.zero_grad();
    EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Graph, ConstantsDoNotRetainGraph) {
    auto x = ad::Tensord::from({1, 2}, {1, 2});
    auto y = ad::relu(x);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.node()->inputs.empty());
}
