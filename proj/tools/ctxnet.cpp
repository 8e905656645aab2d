// ctxnet: data preparation, training, evaluation and inspection tool.
//
//   ctxnet prepare --synthetic classify4 --n 64 --points 256 --seed 7 --out data/train
//   ctxnet train --data data/train --out runs/a --depth 8 --epochs 50
//   ctxnet eval --checkpoint runs/a/best.ckpt --data data/test
//   ctxnet crossval --data data/rooms --groups data/rooms/areas.txt --out runs/cv
//   ctxnet predict --checkpoint runs/a/best.ckpt --input cloud.xyz --out labeled.xyz
//   ctxnet kdtree-inspect --input cloud.xyz --regions 32,64,128 --out tree/
//   ctxnet plotdata --history runs/a/history.tsv --out loss.csv
//   ctxnet params

#include <bit>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "ctxnet/ctxnet.hpp"

#ifndef CTXNET_VERSION
#define CTXNET_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace ctxnet;

namespace {

struct Invocation {
    std::string command;
    std::string argv;
};

/// Written next to every output; contains nothing time- or host-dependent.
void write_manifest(const fs::path& path, const Invocation& inv, const std::vector<std::string>& config_paths,
                    std::uint64_t seed, const std::string& out) {
    KeyValues kv;
    kv.set("command", inv.command);
    kv.set("argv", inv.argv);
    std::string configs;
    for (const auto& c : config_paths) configs += (configs.empty() ? "" : ",") + c;
    kv.set("config", configs.empty() ? "-" : configs);
    kv.set("seed", std::to_string(seed));
    kv.set("version", CTXNET_VERSION);
    kv.set("out", out);
    std::ofstream os(path);
    require(static_cast<bool>(os), "io", "cannot write " + path.string());
    os << kv.to_text();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, "io", "cannot create directory " + dir + ": " + ec.message());
}

std::size_t log2_exact(std::size_t n, const std::string& what) {
    require(n >= 1 && std::has_single_bit(n), "argument", what + " must be a power of two, got " + std::to_string(n));
    return static_cast<std::size_t>(std::countr_zero(n));
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
    std::string synthetic, blocks, mesh, out;
    std::vector<std::string> inputs;
    std::size_t n = 64, points = 1024;
    std::uint64_t seed = 1;
    int label = -1;
    double block_size = 1.0;
    std::size_t min_block_points = 16;
    bool no_normalize = false;
};

void cmd_prepare(const PrepareArgs& a, const Invocation& inv) {
    const int sources = !a.synthetic.empty() + !a.inputs.empty() + !a.blocks.empty() + !a.mesh.empty();
    require(sources == 1, "usage", "prepare needs exactly one of --synthetic, --input, --blocks, --mesh");
    log2_exact(a.points, "--points");

    std::vector<Sample> samples;
    Task task = Task::Classify;
    std::size_t classes = 0;
    if (!a.synthetic.empty()) {
        const auto kind = parse_synthetic_kind(a.synthetic);
        samples = make_synthetic(kind, a.points, a.n, a.seed);
        task = kind == SyntheticKind::Classify4 ? Task::Classify : Task::Segment;
        classes = kind == SyntheticKind::Classify4 ? 4 : 2;
    } else if (!a.blocks.empty()) {
        require(a.label < 0, "usage", "--label does not apply to --blocks");
        const auto room = load_points(a.blocks);
        require(room.has_labels(), "data", "--blocks needs a room file with a label column");
        for (auto& b : split_blocks(room, a.block_size, a.points, a.seed, a.min_block_points))
            samples.push_back({std::move(b), -1});
        require(!samples.empty(), "data", "no block reached " + std::to_string(a.min_block_points) + " points");
        task = Task::Segment;
        classes = room.class_count;
    } else {
        std::vector<PointCloud> clouds;
        if (!a.mesh.empty()) {
            clouds.push_back(sample_mesh(load_mesh(a.mesh), a.points, a.seed));
        } else {
            for (std::size_t i = 0; i < a.inputs.size(); ++i)
                clouds.push_back(resample(load_points(a.inputs[i]), a.points, mix_seed(a.seed, i)));
        }
        for (auto& pc : clouds) {
            if (!a.no_normalize) pc = normalize_unit_sphere(pc);
            Sample s;
            if (a.label >= 0) {
                s.label = a.label;
                pc.labels.clear();
                classes = std::max<std::size_t>(classes, static_cast<std::size_t>(a.label) + 1);
            } else {
                require(pc.has_labels(), "usage", "unlabeled input needs --label for classification");
                task = Task::Segment;
                classes = std::max<std::size_t>(classes, pc.class_count);
            }
            s.cloud = std::move(pc);
            samples.push_back(std::move(s));
        }
        require(a.label >= 0 || task == Task::Segment, "usage", "mixed labeled and unlabeled inputs");
    }
    write_dataset(a.out, samples, task, classes);
    write_manifest(fs::path(a.out) / "manifest.txt", inv, {}, a.seed, a.out);
    std::cout << "wrote " << samples.size() << " samples (" << to_string(task) << ", " << classes << " classes) to "
              << a.out << '\n';
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config, data, out, holdout, resume, task, ablation;
    std::optional<unsigned> depth;
    std::optional<std::size_t> epochs, batch, classes, width_divisor;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    bool augment = false;
    bool quiet = false;
};

NetworkConfig resolve_network(KeyValues kv, const TrainArgs& a, const Dataset& ds) {
    if (!a.task.empty()) kv.set("net.task", a.task);
    if (a.depth) kv.set("net.depth", std::to_string(*a.depth));
    if (a.classes) kv.set("net.class_count", std::to_string(*a.classes));
    if (!a.ablation.empty()) kv.set("net.ablation", a.ablation);
    if (a.config.empty()) {
        // no config file: fill the required keys from the dataset
        if (!kv.has("net.task")) kv.set("net.task", to_string(*ds.task));
        if (!kv.has("net.depth"))
            kv.set("net.depth", std::to_string(log2_exact(ds.samples.front().cloud.n, "sample point count")));
        if (!kv.has("net.class_count")) kv.set("net.class_count", std::to_string(ds.class_count));
        if (!kv.has("net.input_width")) kv.set("net.input_width", std::to_string(ds.samples.front().cloud.f));
    }
    auto cfg = NetworkConfig::from_kv(kv);
    if (a.width_divisor) cfg = cfg.with_widths_divided(*a.width_divisor);
    cfg.validate();
    return cfg;
}

std::vector<Sample> ready_samples(const NetworkConfig& cfg, const Dataset& ds, const std::string& dir) {
    require(ds.task == cfg.task, "data", dir + " is a " + to_string(*ds.task) + " dataset, model is " +
                                             to_string(cfg.task));
    validate_dataset(cfg, ds.samples);
    return ds.samples;
}

void cmd_train(const TrainArgs& a, const Invocation& inv) {
    const auto ds = read_dataset(a.data);
    KeyValues file_kv = a.config.empty() ? KeyValues{} : KeyValues::load(a.config);

    NetworkConfig cfg;
    ModelParams<float> params;
    Adam<float> resume_opt;
    std::size_t start_epoch = 0;
    if (!a.resume.empty()) {
        auto ck = load_checkpoint(a.resume);
        cfg = ck.config;
        if (!a.config.empty() || !a.task.empty() || a.depth || a.classes || !a.ablation.empty() || a.width_divisor) {
            const auto wanted = resolve_network(file_kv, a, ds);
            const auto diff = first_config_difference(cfg, wanted);
            require(diff.empty(), "compatibility", "checkpoint and requested config differ in '" + diff + "'");
        }
        params = std::move(ck.params);
        start_epoch = ck.meta.get_as_or<std::size_t>("meta.epoch", 0);
        if (ck.has_optimizer) resume_opt.restore(ck.opt_step, std::move(ck.opt_m), std::move(ck.opt_v));
    } else {
        cfg = resolve_network(file_kv, a, ds);
    }

    auto tc = TrainConfig::from_kv(file_kv);
    if (a.epochs) tc.epochs = *a.epochs;
    if (a.batch) tc.batch_size = *a.batch;
    if (a.lr) tc.learning_rate = *a.lr;
    if (a.seed) tc.seed = *a.seed;
    if (a.augment) tc.augment = true;
    tc.validate();
    if (a.resume.empty()) params = init_params(cfg, tc.seed);

    const auto data = ready_samples(cfg, ds, a.data);
    std::optional<Dataset> holdout_ds;
    std::vector<Sample> holdout;
    if (!a.holdout.empty()) {
        holdout_ds = read_dataset(a.holdout);
        holdout = ready_samples(cfg, *holdout_ds, a.holdout);
    }

    ensure_dir(a.out);
    const fs::path out(a.out);
    {
        std::ofstream os(out / "config.txt");
        KeyValues eff = cfg.to_kv();
        eff.merge(tc.to_kv());
        os << eff.to_text();
    }
    const bool append = !a.resume.empty() && fs::exists(out / "history.tsv");
    std::ofstream history(out / "history.tsv", append ? std::ios::app : std::ios::trunc);
    require(static_cast<bool>(history), "io", "cannot write history in " + a.out);
    if (!append) write_history_header(history);

    TrainHooks hooks;
    hooks.start_epoch = start_epoch;
    if (!holdout.empty()) hooks.holdout = &holdout;
    if (!a.resume.empty()) hooks.resume_optimizer = &resume_opt;
    const std::size_t total = start_epoch + tc.epochs;
    hooks.on_epoch = [&](const EpochRecord& r, const ModelParams<float>&) {
        write_history_line(history, r);
        history.flush();
        if (!a.quiet) {
            std::cout << "epoch " << r.epoch << '/' << total << "  loss " << format_real(r.loss) << "  acc "
                      << format_real(r.accuracy) << "  miou " << format_real(r.mean_iou);
            if (r.eval_metric) std::cout << "  select " << format_real(*r.eval_metric);
            std::cout << std::endl;
        }
        return true;
    };

    std::cout << "training " << to_string(cfg.task) << " model: " << params.scalar_count() << " parameters, "
              << data.size() << " samples, " << tc.epochs << " epochs\n";
    const auto res = train(cfg, std::move(params), data, tc, hooks);

    Checkpoint last;
    last.config = cfg;
    last.params = res.params;
    last.meta.set("meta.epoch", std::to_string(res.history.empty() ? start_epoch : res.history.back().epoch));
    last.meta.set("meta.seed", std::to_string(tc.seed));
    last.has_optimizer = true;
    last.opt_step = res.optimizer.steps();
    last.opt_m = res.optimizer.first_moments();
    last.opt_v = res.optimizer.second_moments();
    save_checkpoint(last, (out / "last.ckpt").string());

    Checkpoint best;
    best.config = cfg;
    best.params = res.best_params;
    best.meta.set("meta.epoch", std::to_string(res.best_epoch));
    best.meta.set("meta.metric", format_real(res.best_metric));
    save_checkpoint(best, (out / "best.ckpt").string());

    std::vector<std::string> configs;
    if (!a.config.empty()) configs.push_back(a.config);
    if (!a.resume.empty()) configs.push_back(a.resume);
    write_manifest(out / "manifest.txt", inv, configs, tc.seed, a.out);
    std::cout << "best epoch " << res.best_epoch << " (" << (holdout.empty() ? "train" : "holdout") << " metric "
              << format_real(res.best_metric) << "), checkpoints in " << a.out << '\n';
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint, config, data, out, predictions;
};

NetworkConfig checked_config(const Checkpoint& ck, const std::string& config_path) {
    if (config_path.empty()) return ck.config;
    const auto wanted = NetworkConfig::from_kv(KeyValues::load(config_path));
    const auto diff = first_config_difference(ck.config, wanted);
    require(diff.empty(), "compatibility", "checkpoint and " + config_path + " differ in '" + diff + "'");
    return ck.config;
}

MetricsReport report_from_predictions(const Dataset& ds, const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "io", "cannot open " + path);
    ConfusionMatrix cm(ds.class_count);
    std::size_t line_no = 0;
    auto next = [&]() -> std::uint32_t {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            const auto toks = detail::split_ws(line);
            if (toks.empty() || toks[0].front() == '#') continue;
            return static_cast<std::uint32_t>(detail::parse_double(toks[0], line_no));
        }
        fail("data", path + " has fewer predictions than the dataset has targets");
    };
    for (const auto& s : ds.samples) {
        if (*ds.task == Task::Classify) cm.add(static_cast<std::uint32_t>(s.label), next());
        else
            for (auto l : s.cloud.labels) cm.add(l, next());
    }
    return MetricsReport::from_confusion(cm);
}

void cmd_eval(const EvalArgs& a, const Invocation& inv) {
    require(a.checkpoint.empty() != a.predictions.empty(), "usage",
            "eval needs exactly one of --checkpoint and --predictions");
    const auto ds = read_dataset(a.data);
    MetricsReport report;
    if (!a.predictions.empty()) {
        report = report_from_predictions(ds, a.predictions);
    } else {
        const auto ck = load_checkpoint(a.checkpoint);
        const auto cfg = checked_config(ck, a.config);
        report = evaluate(cfg, ck.params, ready_samples(cfg, ds, a.data));
    }
    std::cout << report.to_table();
    if (!a.out.empty()) {
        ensure_dir(a.out);
        std::ofstream(fs::path(a.out) / "metrics.txt") << report.to_kv_text();
        std::vector<std::string> configs;
        for (const auto* p : {&a.checkpoint, &a.config, &a.predictions})
            if (!p->empty()) configs.push_back(*p);
        write_manifest(fs::path(a.out) / "manifest.txt", inv, configs, 0, a.out);
    }
}

// ---------------------------------------------------------------------------
// crossval

struct CrossvalArgs {
    TrainArgs train;
    std::size_t folds = 0;
    std::string groups;
};

/// Fold id of every sample: one fold per distinct group name when a group
/// file is given (e.g. one building area per line), else round-robin.
std::vector<std::size_t> fold_assignment(const CrossvalArgs& a, std::size_t n_samples, std::size_t& fold_count) {
    std::vector<std::size_t> fold(n_samples);
    if (a.groups.empty()) {
        require(a.folds >= 2 && a.folds <= n_samples, "usage",
                "--folds must be between 2 and the sample count (" + std::to_string(n_samples) + ")");
        fold_count = a.folds;
        for (std::size_t i = 0; i < n_samples; ++i) fold[i] = i % a.folds;
        return fold;
    }
    std::ifstream in(a.groups);
    require(static_cast<bool>(in), "io", "cannot open " + a.groups);
    std::map<std::string, std::size_t> ids;
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        require(i < n_samples, "data", a.groups + " lists more groups than the dataset has samples");
        fold[i++] = ids.emplace(std::string(toks[0]), ids.size()).first->second;
    }
    require(i == n_samples, "data", a.groups + " lists " + std::to_string(i) + " groups for " +
                                        std::to_string(n_samples) + " samples");
    require(ids.size() >= 2, "data", "cross validation needs at least two groups");
    fold_count = ids.size();
    return fold;
}

void cmd_crossval(const CrossvalArgs& a, const Invocation& inv) {
    require(a.folds == 0 || a.groups.empty(), "usage", "use either --folds or --groups");
    const auto ds = read_dataset(a.train.data);
    const KeyValues file_kv = a.train.config.empty() ? KeyValues{} : KeyValues::load(a.train.config);
    const auto cfg = resolve_network(file_kv, a.train, ds);
    auto tc = TrainConfig::from_kv(file_kv);
    if (a.train.epochs) tc.epochs = *a.train.epochs;
    if (a.train.batch) tc.batch_size = *a.train.batch;
    if (a.train.lr) tc.learning_rate = *a.train.lr;
    if (a.train.seed) tc.seed = *a.train.seed;
    if (a.train.augment) tc.augment = true;
    tc.validate();
    const auto samples = ready_samples(cfg, ds, a.train.data);

    std::size_t fold_count = 0;
    const auto fold = fold_assignment(a, samples.size(), fold_count);
    ensure_dir(a.train.out);
    const fs::path out(a.train.out);
    ConfusionMatrix pooled(cfg.class_count);
    for (std::size_t f = 0; f < fold_count; ++f) {
        std::vector<Sample> train_set, test_set;
        for (std::size_t i = 0; i < samples.size(); ++i) (fold[i] == f ? test_set : train_set).push_back(samples[i]);
        require(!train_set.empty() && !test_set.empty(), "data", "fold " + std::to_string(f) + " is empty");
        const auto res = train(cfg, init_params(cfg, mix_seed(tc.seed, f)), train_set, tc);
        const auto report = evaluate(cfg, res.params, test_set);
        for (std::size_t k = 0; k < pooled.counts.size(); ++k) pooled.counts[k] += report.confusion.counts[k];

        const auto dir = out / ("fold" + std::to_string(f));
        ensure_dir(dir.string());
        std::ofstream(dir / "metrics.txt") << report.to_kv_text();
        save_checkpoint(res.params, cfg, (dir / "model.ckpt").string());
        std::ofstream history(dir / "history.tsv");
        write_history_header(history);
        for (const auto& r : res.history) write_history_line(history, r);
        std::cout << "fold " << f << ": " << train_set.size() << " train, " << test_set.size() << " test, "
                  << (cfg.task == Task::Classify ? "acc " : "miou ") << format_real(selection_metric(cfg, report))
                  << std::endl;
    }
    const auto summary = MetricsReport::from_confusion(pooled);
    std::cout << "pooled over " << fold_count << " folds\n" << summary.to_table();
    std::ofstream(out / "metrics.txt") << summary.to_kv_text();
    std::vector<std::string> configs;
    if (!a.train.config.empty()) configs.push_back(a.train.config);
    if (!a.groups.empty()) configs.push_back(a.groups);
    write_manifest(out / "manifest.txt", inv, configs, tc.seed, a.train.out);
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
    std::string checkpoint, input, out;
    std::uint64_t seed = 1;
    bool normalize = false;
};

void cmd_predict(const PredictArgs& a, const Invocation& inv) {
    const auto ck = load_checkpoint(a.checkpoint);
    const auto& cfg = ck.config;
    const auto original = load_points(a.input);
    require(original.f >= cfg.input_width, "shape",
            "model expects " + std::to_string(cfg.input_width) + " input columns, file has " +
                std::to_string(original.f));

    PointCloud model_in(original.n, cfg.input_width);
    for (std::size_t i = 0; i < original.n; ++i)
        for (std::size_t j = 0; j < cfg.input_width; ++j) model_in.at(i, j) = original.at(i, j);
    if (a.normalize) model_in = normalize_unit_sphere(model_in);

    const bool exact = model_in.n == cfg.points();
    const auto sampled = exact ? model_in : resample(model_in, cfg.points(), a.seed);
    const auto pred = predict(cfg, ck.params, sampled);

    std::vector<std::uint32_t> labels(original.n);
    if (cfg.task == Task::Classify) {
        std::fill(labels.begin(), labels.end(), pred[0]);
        std::cout << "class " << pred[0] << '\n';
    } else if (exact) {
        labels = pred;
    } else {
        // carry each sampled prediction back to the nearest input point
        for (std::size_t i = 0; i < model_in.n; ++i) {
            const auto p = model_in.xyz(i);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < sampled.n; ++s) {
                const auto q = sampled.xyz(s);
                const double d = (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) +
                                 (p[2] - q[2]) * (p[2] - q[2]);
                if (d < best) {
                    best = d;
                    labels[i] = pred[s];
                }
            }
        }
    }

    PointCloud out = original;
    out.labels = labels;
    out.class_count = static_cast<std::uint32_t>(cfg.class_count);
    const auto parent = fs::path(a.out).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
    save_points(out, a.out, PointFormat::XyzText);
    write_manifest(a.out + ".manifest.txt", inv, {a.checkpoint}, a.seed, a.out);
    std::cout << "wrote " << out.n << " labeled points to " << a.out << '\n';
}

// ---------------------------------------------------------------------------
// kdtree-inspect

struct InspectArgs {
    std::string input, out, regions = "32,64,128";
    std::optional<std::size_t> points;
    std::uint64_t seed = 1;
};

void cmd_inspect(const InspectArgs& a, const Invocation& inv) {
    auto pc = load_points(a.input);
    if (a.points) pc = resample(pc, *a.points, a.seed);
    const auto tree = build_kdtree(pc);
    KeyValues kv;
    kv.set("regions", a.regions);
    const auto sizes = kv.get_list<std::size_t>("regions");

    ensure_dir(a.out);
    const fs::path out(a.out);
    {
        std::ofstream os(out / "nodes.txt");
        os << "# depth ordinal axis slice_start slice_len\n";
        write_tree_dump(os, tree);
    }
    PointCloud annotated(pc.n, 3 + sizes.size());
    std::vector<LevelPartition> parts;
    for (auto s : sizes) parts.push_back(level_partition(tree, s));
    for (std::size_t i = 0; i < pc.n; ++i) {
        for (int c = 0; c < 3; ++c) annotated.at(i, c) = pc.at(i, c);
        for (std::size_t l = 0; l < parts.size(); ++l) annotated.at(i, 3 + l) = parts[l].membership[i];
    }
    {
        std::ofstream os(out / "regions.xyz");
        os << "#cols x y z";
        for (auto s : sizes) os << " region" << s;
        os << '\n';
        for (std::size_t i = 0; i < pc.n; ++i) {
            for (std::size_t c = 0; c < annotated.f; ++c)
                os << (c ? " " : "") << (c < 3 ? detail::format_double(annotated.at(i, c))
                                               : std::to_string(parts[c - 3].membership[i]));
            os << '\n';
        }
    }
    std::cout << "depth " << tree.depth << ", " << pc.n << " points\n";
    for (const auto& p : parts)
        std::cout << "region size " << p.region_size << ": " << p.region_count << " regions\n";
    write_manifest(out / "manifest.txt", inv, {}, a.seed, a.out);
}

// ---------------------------------------------------------------------------
// plotdata

void cmd_plotdata(const std::string& history_path, const std::string& out_path, const Invocation& inv) {
    std::ifstream in(history_path);
    require(static_cast<bool>(in), "io", "cannot open " + history_path);
    const auto recs = read_history(in);
    std::ofstream os(out_path);
    require(static_cast<bool>(os), "io", "cannot write " + out_path);
    os << "epoch,loss,accuracy,mean_iou,lr\n";
    for (const auto& r : recs)
        os << r.epoch << ',' << format_real(r.loss) << ',' << format_real(r.accuracy) << ','
           << format_real(r.mean_iou) << ',' << format_real(r.lr) << '\n';
    write_manifest(out_path + ".manifest.txt", inv, {history_path}, 0, out_path);
    std::cout << "wrote " << recs.size() << " rows to " << out_path << '\n';
}

// ---------------------------------------------------------------------------
// params

void cmd_params(const std::string& config_path, const std::string& task) {
    NetworkConfig cfg;
    if (!config_path.empty()) cfg = NetworkConfig::from_kv(KeyValues::load(config_path));
    else cfg = parse_task(task) == Task::Classify ? NetworkConfig::classification() : NetworkConfig::segmentation();
    Checkpoint ck;
    ck.config = cfg;
    ck.params = init_params(cfg, 0);
    const auto count = ck.params.scalar_count();
    const auto bytes = serialized_size(ck);
    ck.has_optimizer = true;
    for (const auto& [key, t] : ck.params.tensors) {
        ck.opt_m[key].assign(t.size(), 0.0f);
        ck.opt_v[key].assign(t.size(), 0.0f);
    }
    const auto bytes_with_moments = serialized_size(ck);
    std::cout << "task " << to_string(cfg.task) << ", depth " << cfg.depth << ", " << cfg.class_count
              << " classes, ablation " << cfg.ablation.to_list() << '\n';
    std::cout << "parameters " << count << '\n';
    std::cout << "parameter tensors " << ck.params.tensors.size() << '\n';
    std::cout << "float32 bytes " << count * 4 << '\n';
    std::cout << "checkpoint bytes " << bytes << " (" << std::fixed << std::setprecision(2)
              << static_cast<double>(bytes) / 1e6 << " MB)\n";
    std::cout << "checkpoint bytes with optimizer moments " << bytes_with_moments << " ("
              << static_cast<double>(bytes_with_moments) / 1e6 << " MB)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-d tree guided point cloud network toolkit", "ctxnet"};
    app.set_version_flag("--version", std::string(CTXNET_VERSION));
    app.require_subcommand(1);

    Invocation inv;
    for (int i = 1; i < argc; ++i) inv.argv += (i > 1 ? " " : "") + std::string(argv[i]);

    PrepareArgs pa;
    auto* prep = app.add_subcommand("prepare", "build a dataset directory of binary sample files plus index.txt");
    prep->add_option("--synthetic", pa.synthetic, "generate classify4 or segment2");
    prep->add_option("--input", pa.inputs, "point files (xyz-text or binary-v1), one sample each");
    prep->add_option("--blocks", pa.blocks, "room point file to split into labeled xy blocks");
    prep->add_option("--mesh", pa.mesh, "triangle mesh text file to sample");
    prep->add_option("--n", pa.n, "synthetic sample count")->capture_default_str();
    prep->add_option("--points", pa.points, "points per sample (power of two)")->capture_default_str();
    prep->add_option("--seed", pa.seed)->capture_default_str();
    prep->add_option("--label", pa.label, "class id for --input/--mesh samples");
    prep->add_option("--block-size", pa.block_size, "block edge length in meters")->capture_default_str();
    prep->add_option("--min-block-points", pa.min_block_points)->capture_default_str();
    prep->add_flag("--no-normalize", pa.no_normalize, "keep raw coordinates for --input/--mesh");
    prep->add_option("--out", pa.out, "dataset directory")->required();

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "train a model; writes best.ckpt, last.ckpt, history.tsv");
    tr->add_option("--config", ta.config, "key = value config with net.* and train.* keys");
    tr->add_option("--data", ta.data, "dataset directory")->required();
    tr->add_option("--holdout", ta.holdout, "dataset directory used to pick the best checkpoint");
    tr->add_option("--out", ta.out, "run directory")->required();
    tr->add_option("--resume", ta.resume, "continue from a last.ckpt");
    tr->add_option("--task", ta.task, "classify or segment");
    tr->add_option("--depth", ta.depth, "tree depth D (2^D points)");
    tr->add_option("--classes", ta.classes);
    tr->add_option("--ablation", ta.ablation, "enabled components: all, none, or a list of local,global,dense,agg");
    tr->add_option("--width-divisor", ta.width_divisor, "divide every layer width");
    tr->add_option("--epochs", ta.epochs);
    tr->add_option("--lr", ta.lr);
    tr->add_option("--batch", ta.batch);
    tr->add_option("--seed", ta.seed);
    tr->add_flag("--augment", ta.augment, "random z rotation and jitter");
    tr->add_flag("--quiet", ta.quiet);

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "score a checkpoint (or a prediction file) on a dataset");
    ev->add_option("--checkpoint", ea.checkpoint);
    ev->add_option("--predictions", ea.predictions, "one predicted label per line in dataset order");
    ev->add_option("--config", ea.config, "fail unless the checkpoint matches this config");
    ev->add_option("--data", ea.data)->required();
    ev->add_option("--out", ea.out, "directory for metrics.txt");

    PredictArgs pr;
    CrossvalArgs ca;
    auto* cv = app.add_subcommand("crossval", "k-fold cross validation; scores pooled over held-out folds");
    cv->add_option("--data", ca.train.data)->required();
    cv->add_option("--out", ca.train.out)->required();
    cv->add_option("--folds", ca.folds, "round-robin fold count");
    cv->add_option("--groups", ca.groups, "one group name per sample in index order; one fold per group");
    cv->add_option("--config", ca.train.config);
    cv->add_option("--task", ca.train.task);
    cv->add_option("--depth", ca.train.depth);
    cv->add_option("--classes", ca.train.classes);
    cv->add_option("--ablation", ca.train.ablation);
    cv->add_option("--width-divisor", ca.train.width_divisor);
    cv->add_option("--epochs", ca.train.epochs);
    cv->add_option("--lr", ca.train.lr);
    cv->add_option("--batch", ca.train.batch);
    cv->add_option("--seed", ca.train.seed);
    cv->add_flag("--augment", ca.train.augment);

    auto* pd = app.add_subcommand("predict", "write the input cloud with a predicted label column");
    pd->add_option("--checkpoint", pr.checkpoint)->required();
    pd->add_option("--input", pr.input)->required();
    pd->add_option("--out", pr.out, "xyz-text output")->required();
    pd->add_option("--seed", pr.seed, "resampling seed when the cloud is not 2^D points")->capture_default_str();
    pd->add_flag("--normalize", pr.normalize, "center and scale to the unit sphere before inference");

    InspectArgs ia;
    auto* ki = app.add_subcommand("kdtree-inspect", "dump tree nodes and per-level region ids");
    ki->add_option("--input", ia.input)->required();
    ki->add_option("--out", ia.out)->required();
    ki->add_option("--regions", ia.regions, "region sizes")->capture_default_str();
    ki->add_option("--points", ia.points, "resample to this many points first");
    ki->add_option("--seed", ia.seed)->capture_default_str();

    std::string history_path, csv_path;
    auto* pl = app.add_subcommand("plotdata", "convert history.tsv to csv");
    pl->add_option("--history", history_path)->required();
    pl->add_option("--out", csv_path)->required();

    std::string params_config, params_task = "classify";
    auto* pm = app.add_subcommand("params", "parameter count and checkpoint size of a configuration");
    pm->add_option("--config", params_config);
    pm->add_option("--task", params_task, "default configuration to report")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error:usage:" << e.what() << '\n';
        return 2;
    }

    try {
        inv.command = app.get_subcommands().front()->get_name();
        if (*prep) cmd_prepare(pa, inv);
        else if (*tr) cmd_train(ta, inv);
        else if (*ev) cmd_eval(ea, inv);
        else if (*cv) cmd_crossval(ca, inv);
        else if (*pd) cmd_predict(pr, inv);
        else if (*ki) cmd_inspect(ia, inv);
        else if (*pl) cmd_plotdata(history_path, csv_path, inv);
        else if (*pm) cmd_params(params_config, params_task);
    } catch (const Error& e) {
        std::cerr << "error:" << e.category() << ':' << e.what() << '\n';
        return e.category() == "usage" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error:internal:" << e.what() << '\n';
        return 1;
    }
    return 0;
}
