#pragma once

#include <bit>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ctxnet/autodiff.hpp"
#include "ctxnet/context_layers.hpp"
#include "ctxnet/kdtree.hpp"
#include "ctxnet/kvconfig.hpp"
#include "ctxnet/pointcloud.hpp"
#include "ctxnet/rng.hpp"

namespace ctxnet {

enum class Task { Classify, Segment };

inline std::string to_string(Task t) { return t == Task::Classify ? "classify" : "segment"; }

inline Task parse_task(const std::string& s) {
    if (s == "classify") return Task::Classify;
    if (s == "segment") return Task::Segment;
    fail("config", "unknown task '" + s + "' (expected classify or segment)");
}

/// Which contextual components are active. The Table-7-style variants are
/// subsets of {local, global, agg}; dense connections can be toggled too.
struct Ablation {
    bool local_cues = true;
    bool global_cues = true;
    bool dense_connections = true;
    bool hierarchical_aggregation = true;

    /// "all", "none", or a comma list of enabled components drawn from
    /// local, global, dense, agg.
    static Ablation parse(const std::string& list) {
        if (list == "all") return {};
        Ablation a{false, false, false, false};
        if (list == "none" || list.empty()) return a;
        std::string item;
        for (char c : list + ",") {
            if (c != ',') {
                item += c;
                continue;
            }
            if (item == "local") a.local_cues = true;
            else if (item == "global") a.global_cues = true;
            else if (item == "dense") a.dense_connections = true;
            else if (item == "agg") a.hierarchical_aggregation = true;
            else if (!item.empty()) fail("usage", "unknown ablation component '" + item + "'");
            item.clear();
        }
        return a;
    }

    std::string to_list() const {
        std::vector<std::string> on;
        if (local_cues) on.push_back("local");
        if (global_cues) on.push_back("global");
        if (dense_connections) on.push_back("dense");
        if (hierarchical_aggregation) on.push_back("agg");
        if (on.empty()) return "none";
        std::string out;
        for (std::size_t i = 0; i < on.size(); ++i) out += (i ? "," : "") + on[i];
        return out;
    }

    bool operator==(const Ablation&) const = default;
};

struct NetworkConfig {
    Task task = Task::Classify;
    unsigned depth = 10;
    std::size_t input_width = 3;
    std::size_t class_count = 40;
    std::vector<std::size_t> region_sizes{32, 64, 128};
    std::vector<std::vector<std::size_t>> level_widths{{64, 64, 128, 128}, {64, 64, 256, 256}, {64, 64, 512, 512}};
    std::vector<std::size_t> theta_widths{64, 128, 256};
    std::vector<std::size_t> h_widths{128, 256, 512};
    std::vector<std::size_t> agg_widths{1024, 512, 256};
    std::vector<std::size_t> fc_widths{256, 256};
    double dropout = 0.5;
    Ablation ablation;

    bool operator==(const NetworkConfig&) const = default;

    static NetworkConfig classification(std::size_t class_count = 40, unsigned depth = 10) {
        NetworkConfig c;
        c.class_count = class_count;
        c.depth = depth;
        return c;
    }

    static NetworkConfig segmentation(std::size_t class_count = 13, unsigned depth = 12, std::size_t input_width = 9) {
        NetworkConfig c;
        c.task = Task::Segment;
        c.class_count = class_count;
        c.depth = depth;
        c.input_width = input_width;
        c.region_sizes = {32, 128, 512};
        c.agg_widths = {1024, 512, 256, 256, 512, 1024};
        return c;
    }

    std::size_t levels() const { return region_sizes.size(); }
    std::size_t points() const { return std::size_t{1} << depth; }

    /// Same topology with every layer width divided by `divisor` (min 1).
    NetworkConfig with_widths_divided(std::size_t divisor) const {
        NetworkConfig c = *this;
        auto shrink = [divisor](std::vector<std::size_t>& ws) {
            for (auto& w : ws) w = std::max<std::size_t>(1, w / divisor);
        };
        for (auto& ws : c.level_widths) shrink(ws);
        shrink(c.theta_widths);
        shrink(c.h_widths);
        shrink(c.agg_widths);
        shrink(c.fc_widths);
        return c;
    }

    /// Width of the per-point features leaving learning level `l` (0-based).
    std::size_t level_output_width(std::size_t l) const {
        const std::size_t local = level_widths[l].back();
        return local + (ablation.global_cues ? h_widths.back() : local);
    }

    std::size_t level_input_width(std::size_t l) const { return l == 0 ? input_width : level_output_width(l - 1); }

    std::size_t feature_width() const { return level_output_width(levels() - 1); }

    void validate() const {
        const std::size_t L = levels();
        require(L >= 1, "config", "need at least one learning level");
        require(depth <= 24, "config", "depth too large");
        require(input_width >= 3, "config", "input width must be >= 3");
        require(class_count >= 1, "config", "class_count must be positive");
        for (std::size_t l = 0; l < L; ++l) {
            const auto r = region_sizes[l];
            require(r >= 1 && std::has_single_bit(r), "config", "region sizes must be powers of two");
            require(r <= points(), "config",
                    "region size " + std::to_string(r) + " exceeds 2^depth = " + std::to_string(points()));
            require(l == 0 || r >= region_sizes[l - 1], "config", "region sizes must be nondecreasing");
        }
        require(level_widths.size() == L, "config", "need one MLP width list per level");
        auto positive = [](const std::vector<std::size_t>& ws, const char* what) {
            require(!ws.empty(), "config", std::string(what) + " widths are empty");
            for (auto w : ws) require(w > 0, "config", std::string(what) + " widths must be positive");
        };
        for (const auto& ws : level_widths) positive(ws, "level");
        if (ablation.global_cues) {
            positive(theta_widths, "theta");
            positive(h_widths, "h");
        }
        const std::size_t agg_needed = task == Task::Classify ? L : 2 * L;
        require(agg_widths.size() == agg_needed, "config",
                "expected " + std::to_string(agg_needed) + " aggregation widths, got " +
                    std::to_string(agg_widths.size()));
        positive(agg_widths, "aggregation");
        for (auto w : fc_widths) require(w > 0, "config", "fc widths must be positive");
        require(dropout >= 0.0 && dropout < 1.0, "config", "dropout must be in [0,1)");
    }

    KeyValues to_kv() const {
        KeyValues kv;
        kv.set("net.task", to_string(task));
        kv.set("net.depth", std::to_string(depth));
        kv.set("net.input_width", std::to_string(input_width));
        kv.set("net.class_count", std::to_string(class_count));
        kv.set("net.regions", join_list(region_sizes));
        for (std::size_t l = 0; l < level_widths.size(); ++l)
            kv.set("net.level" + std::to_string(l + 1), join_list(level_widths[l]));
        kv.set("net.theta", join_list(theta_widths));
        kv.set("net.h", join_list(h_widths));
        kv.set("net.agg", join_list(agg_widths));
        kv.set("net.fc", join_list(fc_widths));
        kv.set("net.dropout", format_real(dropout));
        kv.set("net.ablation", ablation.to_list());
        return kv;
    }

    /// Reads "net.*" keys. task, depth and class_count are required; the
    /// rest fall back to the task's defaults.
    static NetworkConfig from_kv(const KeyValues& kv) {
        const Task task = parse_task(kv.get("net.task"));
        NetworkConfig c = task == Task::Classify ? classification() : segmentation();
        c.depth = kv.get_as<unsigned>("net.depth");
        c.class_count = kv.get_as<std::size_t>("net.class_count");
        c.input_width = kv.get_as_or<std::size_t>("net.input_width", c.input_width);
        c.region_sizes = kv.get_list_or<std::size_t>("net.regions", c.region_sizes);
        std::vector<std::vector<std::size_t>> widths;
        for (std::size_t l = 0; l < c.region_sizes.size(); ++l) {
            const std::string key = "net.level" + std::to_string(l + 1);
            const auto fallback = l < c.level_widths.size() ? c.level_widths[l] : std::vector<std::size_t>{};
            widths.push_back(kv.get_list_or<std::size_t>(key, fallback));
        }
        c.level_widths = widths;
        c.theta_widths = kv.get_list_or<std::size_t>("net.theta", c.theta_widths);
        c.h_widths = kv.get_list_or<std::size_t>("net.h", c.h_widths);
        c.agg_widths = kv.get_list_or<std::size_t>("net.agg", c.agg_widths);
        c.fc_widths = kv.get_list_or<std::size_t>("net.fc", c.fc_widths);
        c.dropout = kv.get_as_or<double>("net.dropout", c.dropout);
        c.ablation = Ablation::parse(kv.get_or("net.ablation", "all"));
        return c;
    }
};

/// Name of the first "net.*" key on which two configs differ, or "".
inline std::string first_config_difference(const NetworkConfig& a, const NetworkConfig& b) {
    const auto ka = a.to_kv().entries(), kb = b.to_kv().entries();
    for (const auto& [k, v] : ka) {
        auto it = kb.find(k);
        if (it == kb.end() || it->second != v) return k;
    }
    for (const auto& [k, v] : kb)
        if (!ka.count(k)) return k;
    return {};
}

// ---------------------------------------------------------------------------
// Parameters

struct ParamSpec {
    std::string key;
    ad::Extents shape;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    bool is_bias = false;
};

namespace detail {

inline void add_linear(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t in, std::size_t out) {
    specs.push_back({prefix + ".w", {in, out}, in, out, false});
    specs.push_back({prefix + ".b", {out}, in, out, true});
}

inline void add_mlp(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t in,
                    const std::vector<std::size_t>& widths) {
    for (std::size_t k = 0; k < widths.size(); ++k) {
        add_linear(specs, prefix + "." + std::to_string(k), in, widths[k]);
        in = widths[k];
    }
}

}  // namespace detail

/// Every learnable tensor of the configured network, with its shape.
inline std::vector<ParamSpec> param_specs(const NetworkConfig& cfg) {
    cfg.validate();
    std::vector<ParamSpec> specs;
    const std::size_t L = cfg.levels();
    for (std::size_t l = 0; l < L; ++l) {
        const std::string level = "learn.level" + std::to_string(l + 1);
        const auto& widths = cfg.level_widths[l];
        const auto ins = dense_input_widths(cfg.level_input_width(l), widths, cfg.ablation.dense_connections);
        for (std::size_t k = 0; k < widths.size(); ++k)
            detail::add_linear(specs, level + ".mlp." + std::to_string(k), ins[k], widths[k]);
        if (cfg.ablation.global_cues) {
            detail::add_mlp(specs, level + ".theta", widths.back(), cfg.theta_widths);
            detail::add_mlp(specs, level + ".h", widths.back(), cfg.h_widths);
        }
    }
    const std::size_t F = cfg.feature_width();
    const auto& agg = cfg.agg_widths;
    if (cfg.task == Task::Classify) {
        std::size_t sig = 0;
        if (cfg.ablation.hierarchical_aggregation) {
            detail::add_mlp(specs, "agg", F, agg);
            sig = agg.back();
        } else {
            detail::add_linear(specs, "agg.0", F, agg.front());
            sig = agg.front();
        }
        detail::add_mlp(specs, "fc", sig, cfg.fc_widths);
        detail::add_linear(specs, "classifier", cfg.fc_widths.empty() ? sig : cfg.fc_widths.back(),
                           cfg.class_count);
    } else if (cfg.ablation.hierarchical_aggregation) {
        detail::add_mlp(specs, "agg.enc", F, {agg.begin(), agg.begin() + static_cast<std::ptrdiff_t>(L)});
        for (std::size_t k = 0; k < L; ++k) {
            const std::size_t up = k == 0 ? agg[L - 1] : agg[L + k - 1];
            const std::size_t skip = agg[L - 1 - k];
            detail::add_linear(specs, "agg.dec." + std::to_string(k), up + skip, agg[L + k]);
        }
        detail::add_linear(specs, "segmenter", agg.back(), cfg.class_count);
    } else {
        detail::add_linear(specs, "agg.enc.0", F, agg.front());
        detail::add_linear(specs, "agg.dec.0", 2 * agg.front(), agg.back());
        detail::add_linear(specs, "segmenter", agg.back(), cfg.class_count);
    }
    return specs;
}

/// Learnable tensors keyed by stable path, e.g. "learn.level1.mlp.0.w".
template <typename T>
struct ModelParams {
    std::map<std::string, ad::Tensor<T>> tensors;

    const ad::Tensor<T>& at(const std::string& key) const {
        auto it = tensors.find(key);
        require(it != tensors.end(), "compatibility", "missing parameter '" + key + "'");
        return it->second;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& [k, t] : tensors) n += t.size();
        return n;
    }

    void zero_grad() {
        for (auto& [k, t] : tensors) t.zero_grad();
    }

    /// Deep copy into fresh leaves of scalar type U.
    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        for (const auto& [k, t] : tensors) out.tensors.emplace(k, t.template cast<U>(true));
        return out;
    }

    ModelParams clone() const { return cast<T>(); }

    bool values_equal(const ModelParams& o) const {
        if (tensors.size() != o.tensors.size()) return false;
        for (const auto& [k, t] : tensors) {
            auto it = o.tensors.find(k);
            if (it == o.tensors.end() || it->second.shape() != t.shape()) return false;
            if (!std::equal(t.value().begin(), t.value().end(), it->second.value().begin())) return false;
        }
        return true;
    }
};

/// Glorot-uniform weights in (-a, a), a = sqrt(6 / (fan_in + fan_out));
/// zero biases. Draws follow the sorted key order.
inline ModelParams<float> init_params(const NetworkConfig& cfg, std::uint64_t seed) {
    auto specs = param_specs(cfg);
    std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    Rng rng(seed);
    ModelParams<float> params;
    for (const auto& s : specs) {
        std::vector<float> v(ad::extent_product(s.shape), 0.0f);
        if (!s.is_bias) {
            const double a = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
            for (auto& x : v) x = static_cast<float>(rng.uniform(-a, a));
        }
        params.tensors.emplace(s.key, ad::Tensor<float>::parameter(s.shape, std::move(v)));
    }
    return params;
}

// ---------------------------------------------------------------------------
// Forward pass

struct LevelDiagnostics {
    std::size_t region_size = 0;
    std::size_t region_count = 0;
    double gate_min = 0, gate_max = 0, gate_mean = 0;
    std::vector<double> nonlocal_weights;  // region_count x region_count, row-major
};

struct Diagnostics {
    std::vector<LevelDiagnostics> levels;
    std::vector<std::size_t> encoder_rows;  // rows after each aggregation pooling
};

struct ForwardOptions {
    bool training = false;
    std::uint64_t seed = 0;  // dropout masks
    Diagnostics* diagnostics = nullptr;
    std::set<std::string>* touched = nullptr;  // records every parameter key read
};

namespace detail {

template <typename T>
class ParamBinder {
public:
    ParamBinder(const ModelParams<T>& params, std::set<std::string>* touched) : params_(params), touched_(touched) {}

    const ad::Tensor<T>& get(const std::string& key) const {
        if (touched_) touched_->insert(key);
        return params_.at(key);
    }

    Linear<T> linear(const std::string& prefix) const { return {get(prefix + ".w"), get(prefix + ".b")}; }

    Mlp<T> mlp(const std::string& prefix, std::size_t count, bool relu_last) const {
        Mlp<T> m;
        m.relu_last = relu_last;
        for (std::size_t k = 0; k < count; ++k) m.layers.push_back(linear(prefix + "." + std::to_string(k)));
        return m;
    }

private:
    const ModelParams<T>& params_;
    std::set<std::string>* touched_;
};

inline ad::Segments point_segments(const KdTree& tree, std::size_t region_size) {
    auto part = level_partition(tree, region_size);
    return {std::move(part.membership), part.region_count};
}

/// Groups consecutive tree-order regions of size `fine` into regions of
/// size `coarse`.
inline ad::Segments coarsen(std::size_t n_points, std::size_t fine, std::size_t coarse) {
    return ad::Segments::contiguous(n_points / fine, coarse / fine);
}

template <typename T>
ad::Tensor<T> dense_relu(const ad::Tensor<T>& x, const Linear<T>& layer) {
    return ad::relu(apply(layer, x));
}

}  // namespace detail

/// Input features as an [N, input_width] tensor, in original point order.
template <typename T>
ad::Tensor<T> input_tensor(const NetworkConfig& cfg, const PointCloud& pc) {
    require(pc.f == cfg.input_width, "shape",
            "model expects " + std::to_string(cfg.input_width) + " input columns, cloud has " + std::to_string(pc.f));
    require(pc.n == cfg.points(), "size",
            "model expects " + std::to_string(cfg.points()) + " points, cloud has " + std::to_string(pc.n));
    std::vector<T> v(pc.data.begin(), pc.data.end());
    return ad::Tensor<T>::from({pc.n, pc.f}, std::move(v));
}

/// k-d tree guided feature learning: per level a shared (dense) MLP, region
/// max pooling, local recalibration and non-local responses over the pooled
/// regions. Returns one feature row per input point, in input order.
template <typename T>
ad::Tensor<T> feature_learning(const NetworkConfig& cfg, const ModelParams<T>& params, const PointCloud& pc,
                               const KdTree& tree, const ForwardOptions& opts = {}) {
    const detail::ParamBinder<T> bind(params, opts.touched);
    ad::Tensor<T> x = input_tensor<T>(cfg, pc);
    for (std::size_t l = 0; l < cfg.levels(); ++l) {
        const std::string level = "learn.level" + std::to_string(l + 1);
        DenseMlpBlock<T> block;
        block.in_width = cfg.level_input_width(l);
        block.dense = cfg.ablation.dense_connections;
        for (std::size_t k = 0; k < cfg.level_widths[l].size(); ++k)
            block.layers.push_back(bind.linear(level + ".mlp." + std::to_string(k)));
        const auto y = dense_mlp_forward(block, x);

        const auto seg = detail::point_segments(tree, cfg.region_sizes[l]);
        const auto pooled = ad::segment_max(y, seg);

        ad::Tensor<T> gate;
        const auto local = cfg.ablation.local_cues ? local_recalibrate(y, pooled, seg, &gate) : y;

        ad::Tensor<T> weights;
        ad::Tensor<T> context = pooled;
        if (cfg.ablation.global_cues) {
            NonLocalBlock<T> nl{bind.mlp(level + ".theta", cfg.theta_widths.size(), false),
                                bind.mlp(level + ".h", cfg.h_widths.size(), false)};
            context = non_local(nl, pooled, &weights);
        }
        x = ad::concat_cols<T>({local, ad::broadcast_rows(context, seg)});

        if (opts.diagnostics) {
            LevelDiagnostics d;
            d.region_size = cfg.region_sizes[l];
            d.region_count = seg.count;
            if (gate) {
                const auto g = gate.value();
                d.gate_min = *std::min_element(g.begin(), g.end());
                d.gate_max = *std::max_element(g.begin(), g.end());
                d.gate_mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
            }
            if (weights) d.nonlocal_weights.assign(weights.value().begin(), weights.value().end());
            opts.diagnostics->levels.push_back(std::move(d));
        }
    }
    return x;
}

/// Bottom-up aggregation to a global signature, then the fully-connected
/// head. Returns [1, class_count] logits.
template <typename T>
ad::Tensor<T> aggregate_classify(const NetworkConfig& cfg, const ModelParams<T>& params, const ad::Tensor<T>& feats,
                                 const KdTree& tree, const ForwardOptions& opts = {}) {
    require(cfg.task == Task::Classify, "config", "aggregate_classify on a segmentation config");
    const detail::ParamBinder<T> bind(params, opts.touched);
    const std::size_t N = feats.rows(), L = cfg.levels();
    ad::Tensor<T> signature;
    if (cfg.ablation.hierarchical_aggregation) {
        ad::Tensor<T> cur = feats;
        for (std::size_t k = 0; k < L; ++k) {
            const auto h = detail::dense_relu(cur, bind.linear("agg." + std::to_string(k)));
            const auto seg = k == 0 ? detail::point_segments(tree, cfg.region_sizes[0])
                                    : detail::coarsen(N, cfg.region_sizes[k - 1], cfg.region_sizes[k]);
            cur = ad::segment_max(h, seg);
            if (opts.diagnostics) opts.diagnostics->encoder_rows.push_back(cur.rows());
        }
        signature = ad::segment_max(cur, ad::Segments::single(cur.rows()));
    } else {
        const auto h = detail::dense_relu(feats, bind.linear("agg.0"));
        signature = ad::segment_max(h, ad::Segments::single(N));
    }
    for (std::size_t k = 0; k < cfg.fc_widths.size(); ++k) {
        signature = detail::dense_relu(signature, bind.linear("fc." + std::to_string(k)));
        signature = ad::dropout(signature, cfg.dropout, opts.training, mix_seed(opts.seed, k));
    }
    return apply(bind.linear("classifier"), signature);
}

/// Encoder-decoder over the tree: pooled encoder rounds keep their pre-pool
/// activations as skips; decoder rounds broadcast back to the finer scale,
/// concatenate the skip and apply an MLP. Returns [N, class_count] logits.
template <typename T>
ad::Tensor<T> aggregate_segment(const NetworkConfig& cfg, const ModelParams<T>& params, const ad::Tensor<T>& feats,
                                const KdTree& tree, const ForwardOptions& opts = {}) {
    require(cfg.task == Task::Segment, "config", "aggregate_segment on a classification config");
    const detail::ParamBinder<T> bind(params, opts.touched);
    const std::size_t N = feats.rows(), L = cfg.levels();
    ad::Tensor<T> cur;
    if (cfg.ablation.hierarchical_aggregation) {
        std::vector<ad::Tensor<T>> skips;
        std::vector<ad::Segments> segs;
        cur = feats;
        for (std::size_t k = 0; k < L; ++k) {
            const auto s = detail::dense_relu(cur, bind.linear("agg.enc." + std::to_string(k)));
            segs.push_back(k == 0 ? detail::point_segments(tree, cfg.region_sizes[0])
                                  : detail::coarsen(N, cfg.region_sizes[k - 1], cfg.region_sizes[k]));
            skips.push_back(s);
            cur = ad::segment_max(s, segs.back());
            if (opts.diagnostics) opts.diagnostics->encoder_rows.push_back(cur.rows());
        }
        for (std::size_t k = 0; k < L; ++k) {
            const std::size_t r = L - 1 - k;
            const auto up = ad::broadcast_rows(cur, segs[r]);
            cur = detail::dense_relu(ad::concat_cols<T>({up, skips[r]}), bind.linear("agg.dec." + std::to_string(k)));
        }
    } else {
        const auto s = detail::dense_relu(feats, bind.linear("agg.enc.0"));
        const auto all = ad::Segments::single(N);
        const auto global = ad::broadcast_rows(ad::segment_max(s, all), all);
        cur = detail::dense_relu(ad::concat_cols<T>({s, global}), bind.linear("agg.dec.0"));
    }
    return apply(bind.linear("segmenter"), cur);
}

template <typename T>
ad::Tensor<T> forward(const NetworkConfig& cfg, const ModelParams<T>& params, const PointCloud& pc,
                      const KdTree& tree, const ForwardOptions& opts = {}) {
    const auto feats = feature_learning(cfg, params, pc, tree, opts);
    return cfg.task == Task::Classify ? aggregate_classify(cfg, params, feats, tree, opts)
                                      : aggregate_segment(cfg, params, feats, tree, opts);
}

/// Builds the k-d tree, then runs the full network.
template <typename T>
ad::Tensor<T> forward(const NetworkConfig& cfg, const ModelParams<T>& params, const PointCloud& pc,
                      const ForwardOptions& opts = {}) {
    return forward(cfg, params, pc, build_kdtree(pc), opts);
}

/// Argmax per row.
template <typename T>
std::vector<std::uint32_t> predict_labels(const ad::Tensor<T>& logits) {
    std::vector<std::uint32_t> out(logits.rows());
    const std::size_t k = logits.cols();
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = logits.value().subspan(i * k, k);
        out[i] = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

}  // namespace ctxnet
