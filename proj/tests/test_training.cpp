#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ctxnet/training.hpp"

using namespace ctxnet;

namespace {

NetworkConfig tiny_classify() {
    auto c = NetworkConfig::classification(4, 5).with_widths_divided(16);
    c.region_sizes = {4, 8, 16};
    return c;
}

TrainConfig quick(std::size_t epochs) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 4;
    tc.seed = 3;
    return tc;
}

std::string category_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.category();
    }
    return "";
}

}  // namespace

TEST(Metrics, PerfectPredictions) {
    ConfusionMatrix cm(3);
    for (std::uint32_t c = 0; c < 3; ++c) cm.add(c, c, 5);
    const auto r = MetricsReport::from_confusion(cm);
    EXPECT_EQ(r.overall_accuracy, 1.0);
    EXPECT_EQ(r.mean_iou, 1.0);
    EXPECT_EQ(r.avg_class_accuracy, 1.0);
}

TEST(Metrics, SymmetricTwoClassConfusion) {
    ConfusionMatrix cm(2);
    cm.add(0, 0, 3);
    cm.add(0, 1, 1);
    cm.add(1, 0, 1);
    cm.add(1, 1, 3);
    const auto r = MetricsReport::from_confusion(cm);
    EXPECT_DOUBLE_EQ(r.per_class_iou[0], 3.0 / 5.0);
    EXPECT_DOUBLE_EQ(r.per_class_iou[1], 3.0 / 5.0);
    EXPECT_DOUBLE_EQ(r.mean_iou, 0.6);
    EXPECT_DOUBLE_EQ(r.overall_accuracy, 0.75);
}

TEST(Metrics, ConstantPredictor) {
    ConfusionMatrix cm(2);
    cm.add(0, 0, 10);
    cm.add(1, 0, 10);
    const auto r = MetricsReport::from_confusion(cm);
    EXPECT_DOUBLE_EQ(r.overall_accuracy, 0.5);
    EXPECT_DOUBLE_EQ(r.per_class_iou[0], 0.5);
    EXPECT_DOUBLE_EQ(r.per_class_iou[1], 0.0);
    EXPECT_DOUBLE_EQ(r.avg_class_accuracy, 0.5);
}

TEST(Metrics, AbsentClassesLeaveTheMeans) {
    ConfusionMatrix cm(4);
    cm.add(0, 0, 4);
    cm.add(1, 1, 2);
    cm.add(1, 2, 2);  // class 2 predicted but never true
    const auto r = MetricsReport::from_confusion(cm);
    EXPECT_TRUE(std::isnan(r.per_class_iou[3]));
    EXPECT_TRUE(std::isnan(r.per_class_accuracy[2]));
    EXPECT_DOUBLE_EQ(r.per_class_iou[2], 0.0);
    EXPECT_DOUBLE_EQ(r.mean_iou, (1.0 + 0.5 + 0.0) / 3.0);
    EXPECT_DOUBLE_EQ(r.avg_class_accuracy, (1.0 + 0.5) / 2.0);
}

TEST(Metrics, RandomConfusionsAgreeWithDirectCounting) {
    Rng rng(9);
    for (int t = 0; t < 200; ++t) {
        const std::size_t k = 1 + rng.below(6);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(1 + rng.below(300));
        for (auto& p : pairs) p = {static_cast<std::uint32_t>(rng.below(k)), static_cast<std::uint32_t>(rng.below(k))};
        ConfusionMatrix cm(k), shuffled(k);
        for (auto [a, b] : pairs) cm.add(a, b);
        for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.below(i)]);
        for (auto [a, b] : pairs) shuffled.add(a, b);
        const auto r = MetricsReport::from_confusion(cm);
        EXPECT_EQ(r.confusion.total(), pairs.size());
        EXPECT_EQ(MetricsReport::from_confusion(shuffled).mean_iou, r.mean_iou);
        std::size_t correct = 0;
        for (auto [a, b] : pairs) correct += a == b;
        EXPECT_DOUBLE_EQ(r.overall_accuracy, static_cast<double>(correct) / static_cast<double>(pairs.size()));
        for (std::size_t c = 0; c < k; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (auto [a, b] : pairs) {
                tp += a == c && b == c;
                fp += a != c && b == c;
                fn += a == c && b != c;
            }
            if (tp + fp + fn == 0) {
                EXPECT_TRUE(std::isnan(r.per_class_iou[c]));
            } else {
                EXPECT_DOUBLE_EQ(r.per_class_iou[c], static_cast<double>(tp) / static_cast<double>(tp + fp + fn));
                EXPECT_GE(r.per_class_iou[c], 0.0);
                EXPECT_LE(r.per_class_iou[c], 1.0);
            }
        }
    }
}

TEST(Metrics, KeyValueText) {
    ConfusionMatrix cm(2);
    cm.add(0, 0, 3);
    cm.add(1, 0, 1);
    const auto kv = KeyValues::parse(MetricsReport::from_confusion(cm).to_kv_text());
    EXPECT_EQ(kv.get("overall_accuracy"), "0.75");
    EXPECT_EQ(kv.get("iou.1"), "0");
    EXPECT_EQ(kv.get("confusion.1"), "1,0");
}

TEST(Evaluate, EmptyDataIsArgumentError) {
    const auto cfg = tiny_classify();
    const auto params = init_params(cfg, 1);
    EXPECT_EQ(category_of([&] { evaluate(cfg, params, {}); }), "argument");
}

TEST(Checkpoint, RoundTripIsBitExact) {
    for (auto cfg : {tiny_classify(), NetworkConfig::segmentation(5, 9).with_widths_divided(8)}) {
        cfg.ablation = Ablation::parse("global,dense,agg");
        Checkpoint ck;
        ck.config = cfg;
        ck.params = init_params(cfg, 77);
        ck.meta.set("meta.epoch", "12");
        std::stringstream ss;
        write_checkpoint(ss, ck);
        const auto back = read_checkpoint(ss);
        EXPECT_EQ(back.config, cfg);
        EXPECT_TRUE(back.params.values_equal(ck.params));
        EXPECT_EQ(back.meta.get("meta.epoch"), "12");
        EXPECT_FALSE(back.has_optimizer);
    }
}

TEST(Checkpoint, OptimizerStateRoundTrip) {
    const auto cfg = tiny_classify();
    Checkpoint ck;
    ck.config = cfg;
    ck.params = init_params(cfg, 1);
    ck.has_optimizer = true;
    ck.opt_step = 17;
    ck.opt_m["classifier.b"] = {1.0f, 2.0f, 3.0f, 4.0f};
    ck.opt_v["classifier.b"] = {0.5f, 0.25f, 0.125f, 1.0f};
    std::stringstream ss;
    write_checkpoint(ss, ck);
    const auto back = read_checkpoint(ss);
    EXPECT_TRUE(back.has_optimizer);
    EXPECT_EQ(back.opt_step, 17u);
    EXPECT_EQ(back.opt_m, ck.opt_m);
    EXPECT_EQ(back.opt_v, ck.opt_v);
}

TEST(Checkpoint, CorruptionIsFormatError) {
    const auto cfg = tiny_classify();
    std::stringstream ss;
    Checkpoint ck;
    ck.config = cfg;
    ck.params = init_params(cfg, 1);
    write_checkpoint(ss, ck);
    const auto bytes = ss.str();
    for (std::size_t cut : {std::size_t{2}, std::size_t{7}, bytes.size() / 2, bytes.size() - 1}) {
        std::istringstream is(bytes.substr(0, cut));
        EXPECT_EQ(category_of([&] { read_checkpoint(is); }), "format") << cut;
    }
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    std::istringstream is1(bad_magic);
    EXPECT_EQ(category_of([&] { read_checkpoint(is1); }), "format");
    auto bad_version = bytes;
    bad_version[4] = 9;
    std::istringstream is2(bad_version);
    EXPECT_EQ(category_of([&] { read_checkpoint(is2); }), "format");
}

TEST(Checkpoint, MissingParameterIsRejected) {
    const auto cfg = tiny_classify();
    Checkpoint ck;
    ck.config = cfg;
    ck.params = init_params(cfg, 1);
    ck.params.tensors.erase("classifier.w");
    std::stringstream ss;
    write_checkpoint(ss, ck);
    EXPECT_EQ(category_of([&] { read_checkpoint(ss); }), "format");
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    const auto cfg = tiny_classify();
    auto params = init_params(cfg, 2);
    const auto before = params.clone();
    params.zero_grad();
    for (auto& [k, t] : params.tensors) t.mutable_grad();  // allocate zero gradients
    Adam<float> opt;
    for (int i = 0; i < 5; ++i) opt.step(params, 1e-2);
    EXPECT_TRUE(params.values_equal(before));
}

TEST(Adam, FirstStepMovesBySignTimesRate) {
    auto p = ad::Tensorf::parameter({3}, {1.0f, 1.0f, 1.0f});
    ModelParams<float> params;
    params.tensors.emplace("x", p);
    p.mutable_grad()[0] = 2.0f;
    p.mutable_grad()[1] = -0.5f;
    Adam<float> opt;
    opt.step(params, 0.1);
    EXPECT_NEAR(p.value()[0], 0.9f, 1e-6);
    EXPECT_NEAR(p.value()[1], 1.1f, 1e-6);
    EXPECT_EQ(p.value()[2], 1.0f);
}

TEST(TrainConfig, LearningRateSchedule) {
    TrainConfig tc;
    EXPECT_DOUBLE_EQ(tc.lr_at(0), 1e-3);
    EXPECT_DOUBLE_EQ(tc.lr_at(19), 1e-3);
    EXPECT_DOUBLE_EQ(tc.lr_at(20), 7e-4);
    EXPECT_DOUBLE_EQ(tc.lr_at(45), 1e-3 * 0.49);
    const auto back = TrainConfig::from_kv(KeyValues::parse(tc.to_kv().to_text()));
    EXPECT_EQ(back.to_kv(), tc.to_kv());
}

TEST(History, WriteReadRoundTrip) {
    std::vector<EpochRecord> recs{{1, 1.25, 0.5, 0.25, 1e-3, {}}, {2, 0.875, 0.75, 0.5, 7e-4, {}}};
    std::stringstream ss;
    write_history_header(ss);
    for (const auto& r : recs) write_history_line(ss, r);
    EXPECT_EQ(read_history(ss), recs);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
    const auto cfg = tiny_classify();
    const auto data = make_synthetic(SyntheticKind::Classify4, cfg.points(), 8, 5);
    auto tc = quick(3);
    tc.learning_rate = 0.0;
    const auto init = init_params(cfg, 5);
    const auto res = train(cfg, init.clone(), data, tc);
    EXPECT_TRUE(res.params.values_equal(init));
    EXPECT_EQ(res.history.size(), 3u);
}

TEST(Train, SingleSampleLossDecreases) {
    const auto cfg = tiny_classify();
    const auto data = make_synthetic(SyntheticKind::Classify4, cfg.points(), 1, 6);
    auto tc = quick(200);
    tc.batch_size = 1;
    const auto res = train(cfg, init_params(cfg, 6), data, tc);
    EXPECT_LT(res.history.back().loss, res.history.front().loss);
}

TEST(Train, DeterministicUnderSeed) {
    const auto cfg = tiny_classify();
    const auto data = make_synthetic(SyntheticKind::Classify4, cfg.points(), 8, 7);
    auto tc = quick(4);
    tc.augment = true;
    const auto a = train(cfg, init_params(cfg, 7), data, tc);
    const auto b = train(cfg, init_params(cfg, 7), data, tc);
    EXPECT_EQ(a.history, b.history);
    EXPECT_TRUE(a.params.values_equal(b.params));
    tc.seed = 4;
    const auto c = train(cfg, init_params(cfg, 7), data, tc);
    EXPECT_FALSE(a.params.values_equal(c.params));
}

TEST(Train, ResumeContinuesEpochNumbersAndMatchesUninterruptedRun) {
    const auto cfg = tiny_classify();
    const auto data = make_synthetic(SyntheticKind::Classify4, cfg.points(), 8, 8);
    const auto full = train(cfg, init_params(cfg, 8), data, quick(4));
    const auto first = train(cfg, init_params(cfg, 8), data, quick(2));
    TrainHooks hooks;
    hooks.start_epoch = 2;
    hooks.resume_optimizer = &first.optimizer;
    const auto second = train(cfg, first.params.clone(), data, quick(2), hooks);
    ASSERT_EQ(second.history.size(), 2u);
    EXPECT_EQ(second.history[0].epoch, 3u);
    EXPECT_EQ(second.history[1], full.history[3]);
    EXPECT_TRUE(second.params.values_equal(full.params));
}

TEST(Train, LabelOutsideClassesIsDataError) {
    const auto cfg = tiny_classify();
    auto data = make_synthetic(SyntheticKind::Classify4, cfg.points(), 2, 9);
    data[1].label = 7;
    EXPECT_EQ(category_of([&] { train(cfg, init_params(cfg, 9), data, quick(1)); }), "data");
}

TEST(Train, NonFiniteLossIsDivergence) {
    const auto cfg = tiny_classify();
    const auto data = make_synthetic(SyntheticKind::Classify4, cfg.points(), 2, 9);
    auto params = init_params(cfg, 9);
    params.tensors.at("classifier.b").mutable_value()[0] = std::numeric_limits<float>::infinity();
    try {
        train(cfg, params, data, quick(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), "divergence");
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    }
}

TEST(Train, EarlyStopThroughCallback) {
    const auto cfg = tiny_classify();
    const auto data = make_synthetic(SyntheticKind::Classify4, cfg.points(), 4, 10);
    TrainHooks hooks;
    hooks.on_epoch = [](const EpochRecord& r, const ModelParams<float>&) { return r.epoch < 2; };
    const auto res = train(cfg, init_params(cfg, 10), data, quick(10), hooks);
    EXPECT_EQ(res.history.size(), 2u);
}
