#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ctxnet/checkpoint.hpp"
#include "ctxnet/kvconfig.hpp"
#include "ctxnet/metrics.hpp"
#include "ctxnet/network.hpp"
#include "ctxnet/optimizer.hpp"
#include "ctxnet/pointcloud.hpp"

namespace ctxnet {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double lr_decay = 0.7;
    std::size_t lr_step = 20;
    AdamOptions adam;
    std::uint64_t seed = 1;
    bool augment = false;
    AugmentOptions augment_options;
    std::size_t eval_every = 1;
    std::vector<double> class_weights;  // empty: unweighted

    void validate() const {
        require(epochs > 0 && batch_size > 0 && lr_step > 0 && eval_every > 0, "config",
                "epochs, batch, lr_step and eval_every must be positive");
        require(learning_rate >= 0.0 && std::isfinite(learning_rate), "config", "learning rate must be >= 0");
        require(lr_decay > 0.0, "config", "lr decay must be positive");
    }

    /// Learning rate in effect during 0-based epoch `e`.
    double lr_at(std::size_t e) const {
        return learning_rate * std::pow(lr_decay, static_cast<double>(e / lr_step));
    }

    KeyValues to_kv() const {
        KeyValues kv;
        kv.set("train.epochs", std::to_string(epochs));
        kv.set("train.batch", std::to_string(batch_size));
        kv.set("train.lr", format_real(learning_rate));
        kv.set("train.lr_decay", format_real(lr_decay));
        kv.set("train.lr_step", std::to_string(lr_step));
        kv.set("train.beta1", format_real(adam.beta1));
        kv.set("train.beta2", format_real(adam.beta2));
        kv.set("train.epsilon", format_real(adam.epsilon));
        kv.set("train.seed", std::to_string(seed));
        kv.set("train.augment", augment ? "true" : "false");
        kv.set("train.augment.rotate", augment_options.rotate_z ? "true" : "false");
        kv.set("train.augment.jitter_sigma", format_real(augment_options.jitter_sigma));
        kv.set("train.augment.jitter_clip", format_real(augment_options.jitter_clip));
        kv.set("train.eval_every", std::to_string(eval_every));
        if (!class_weights.empty()) kv.set("train.class_weights", join_list(class_weights));
        return kv;
    }

    static TrainConfig from_kv(const KeyValues& kv) {
        TrainConfig c;
        c.epochs = kv.get_as_or<std::size_t>("train.epochs", c.epochs);
        c.batch_size = kv.get_as_or<std::size_t>("train.batch", c.batch_size);
        c.learning_rate = kv.get_as_or<double>("train.lr", c.learning_rate);
        c.lr_decay = kv.get_as_or<double>("train.lr_decay", c.lr_decay);
        c.lr_step = kv.get_as_or<std::size_t>("train.lr_step", c.lr_step);
        c.adam.beta1 = kv.get_as_or<double>("train.beta1", c.adam.beta1);
        c.adam.beta2 = kv.get_as_or<double>("train.beta2", c.adam.beta2);
        c.adam.epsilon = kv.get_as_or<double>("train.epsilon", c.adam.epsilon);
        c.seed = kv.get_as_or<std::uint64_t>("train.seed", c.seed);
        c.augment = kv.get_as_or<bool>("train.augment", c.augment);
        c.augment_options.rotate_z = kv.get_as_or<bool>("train.augment.rotate", c.augment_options.rotate_z);
        c.augment_options.jitter_sigma = kv.get_as_or<double>("train.augment.jitter_sigma", c.augment_options.jitter_sigma);
        c.augment_options.jitter_clip = kv.get_as_or<double>("train.augment.jitter_clip", c.augment_options.jitter_clip);
        c.eval_every = kv.get_as_or<std::size_t>("train.eval_every", c.eval_every);
        c.class_weights = kv.get_list_or<double>("train.class_weights", {});
        return c;
    }
};

/// One history line: "epoch loss acc miou lr". acc/miou are computed from
/// the training forward passes of that epoch.
struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss = 0;
    double accuracy = 0;
    double mean_iou = 0;
    double lr = 0;
    std::optional<double> eval_metric;

    bool operator==(const EpochRecord&) const = default;
};

inline void write_history_header(std::ostream& os) { os << "# epoch\tloss\tacc\tmiou\tlr\n"; }

inline void write_history_line(std::ostream& os, const EpochRecord& r) {
    os << r.epoch << '\t' << format_real(r.loss) << '\t' << format_real(r.accuracy) << '\t'
       << format_real(r.mean_iou) << '\t' << format_real(r.lr) << '\n';
}

inline std::vector<EpochRecord> read_history(std::istream& is) {
    std::vector<EpochRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        require(toks.size() == 5, "parse", "history line " + std::to_string(line_no) + ": expected 5 fields");
        EpochRecord r;
        r.epoch = static_cast<std::size_t>(detail::parse_double(toks[0], line_no));
        r.loss = detail::parse_double(toks[1], line_no);
        r.accuracy = detail::parse_double(toks[2], line_no);
        r.mean_iou = detail::parse_double(toks[3], line_no);
        r.lr = detail::parse_double(toks[4], line_no);
        out.push_back(r);
    }
    return out;
}

/// Labels the loss and the confusion matrix consume for one sample: one
/// per cloud for classification, one per point for segmentation.
inline std::vector<std::uint32_t> target_labels(const NetworkConfig& cfg, const Sample& s) {
    if (cfg.task == Task::Classify) return {static_cast<std::uint32_t>(s.label)};
    return s.cloud.labels;
}

inline void validate_dataset(const NetworkConfig& cfg, const std::vector<Sample>& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data[i];
        const std::string where = "sample " + std::to_string(i) + ": ";
        require(s.cloud.n == cfg.points(), "data",
                where + std::to_string(s.cloud.n) + " points, model needs " + std::to_string(cfg.points()));
        require(s.cloud.f == cfg.input_width, "data",
                where + std::to_string(s.cloud.f) + " columns, model needs " + std::to_string(cfg.input_width));
        if (cfg.task == Task::Classify) {
            require(s.label >= 0 && static_cast<std::size_t>(s.label) < cfg.class_count, "data",
                    where + "label " + std::to_string(s.label) + " outside " + std::to_string(cfg.class_count) +
                        " classes");
        } else {
            require(s.cloud.labels.size() == s.cloud.n, "data", where + "segmentation needs per-point labels");
            for (auto l : s.cloud.labels)
                require(l < cfg.class_count, "data",
                        where + "label " + std::to_string(l) + " outside " + std::to_string(cfg.class_count) +
                            " classes");
        }
    }
}

inline std::vector<std::uint32_t> predict(const NetworkConfig& cfg, const ModelParams<float>& params,
                                          const PointCloud& pc) {
    return predict_labels(forward(cfg, params, pc));
}

/// Confusion over all samples (classification) or all points
/// (segmentation), inference mode.
inline MetricsReport evaluate(const NetworkConfig& cfg, const ModelParams<float>& params,
                              const std::vector<Sample>& data) {
    require(!data.empty(), "argument", "evaluation needs at least one sample");
    validate_dataset(cfg, data);
    ConfusionMatrix cm(cfg.class_count);
    for (const auto& s : data) {
        const auto pred = predict(cfg, params, s.cloud);
        const auto truth = target_labels(cfg, s);
        for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    }
    return MetricsReport::from_confusion(cm);
}

/// Metric used to pick the best checkpoint.
inline double selection_metric(const NetworkConfig& cfg, const MetricsReport& r) {
    return cfg.task == Task::Classify ? r.overall_accuracy : r.mean_iou;
}

struct TrainHooks {
    const std::vector<Sample>* holdout = nullptr;
    std::size_t start_epoch = 0;           // epochs already completed (resume)
    const Adam<float>* resume_optimizer = nullptr;
    /// Called after every epoch; returning false stops training.
    std::function<bool(const EpochRecord&, const ModelParams<float>&)> on_epoch;
};

struct TrainResult {
    ModelParams<float> params;
    ModelParams<float> best_params;
    double best_metric = -1;
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> history;
    Adam<float> optimizer;
};

/// Minibatch Adam on mean cross-entropy. Deterministic under
/// `tc.seed`: batch order, augmentation and dropout masks are all derived
/// from it. `params` is updated in place and also returned.
inline TrainResult train(const NetworkConfig& cfg, ModelParams<float> params, const std::vector<Sample>& data,
                         const TrainConfig& tc, const TrainHooks& hooks = {}) {
    cfg.validate();
    tc.validate();
    require(!data.empty(), "argument", "training needs at least one sample");
    validate_dataset(cfg, data);
    if (hooks.holdout) validate_dataset(cfg, *hooks.holdout);
    require(tc.class_weights.empty() || tc.class_weights.size() == cfg.class_count, "config",
            "train.class_weights needs one weight per class");

    TrainResult result;
    result.optimizer = hooks.resume_optimizer ? *hooks.resume_optimizer : Adam<float>(tc.adam);
    result.best_params = params.clone();

    std::vector<KdTree> trees;
    if (!tc.augment) {
        trees.reserve(data.size());
        for (const auto& s : data) trees.push_back(build_kdtree(s.cloud));
    }

    std::vector<std::size_t> order(data.size());
    for (std::size_t e = hooks.start_epoch; e < hooks.start_epoch + tc.epochs; ++e) {
        const double lr = tc.lr_at(e);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(mix_seed(tc.seed, e, 0x5eed));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        ConfusionMatrix cm(cfg.class_count);
        double loss_sum = 0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += tc.batch_size, ++batch) {
            const std::size_t stop = std::min(order.size(), start + tc.batch_size);
            const float inv = 1.0f / static_cast<float>(stop - start);
            params.zero_grad();
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t idx = order[b];
                const auto& smp = data[idx];
                ForwardOptions fo;
                fo.training = true;
                fo.seed = mix_seed(tc.seed, e, idx + 1);
                ad::Tensorf logits;
                if (tc.augment) {
                    const auto cloud = augment(smp.cloud, tc.augment_options, mix_seed(tc.seed, e, ~idx));
                    logits = forward(cfg, params, cloud, fo);
                } else {
                    logits = forward(cfg, params, smp.cloud, trees[idx], fo);
                }
                const auto truth = target_labels(cfg, smp);
                const auto loss = ad::cross_entropy(logits, std::span<const std::uint32_t>(truth), tc.class_weights);
                const double lv = loss.item();
                require(std::isfinite(lv), "divergence",
                        "non-finite loss at epoch " + std::to_string(e + 1) + ", batch " + std::to_string(batch + 1));
                loss_sum += lv;
                ad::backward(ad::scale(loss, inv));
                const auto pred = predict_labels(logits);
                for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
            }
            result.optimizer.step(params, lr);
        }

        const auto report = MetricsReport::from_confusion(cm);
        EpochRecord rec;
        rec.epoch = e + 1;
        rec.loss = loss_sum / static_cast<double>(data.size());
        rec.accuracy = report.overall_accuracy;
        rec.mean_iou = report.mean_iou;
        rec.lr = lr;
        const bool eval_now = (e + 1 - hooks.start_epoch) % tc.eval_every == 0;
        if (eval_now) {
            const double metric = hooks.holdout ? selection_metric(cfg, evaluate(cfg, params, *hooks.holdout))
                                                : selection_metric(cfg, report);
            rec.eval_metric = metric;
            if (metric > result.best_metric) {
                result.best_metric = metric;
                result.best_epoch = rec.epoch;
                result.best_params = params.clone();
            }
        }
        result.history.push_back(rec);
        if (hooks.on_epoch && !hooks.on_epoch(rec, params)) break;
    }
    result.params = std::move(params);
    return result;
}

}  // namespace ctxnet
