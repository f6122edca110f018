#include "osr/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "osr/data.hpp"
#include "osr/errors.hpp"
#include "osr/gradcheck_suite.hpp"
#include "osr/metrics.hpp"
#include "osr/model.hpp"
#include "osr/training.hpp"

namespace osr {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
    }
}

json load_json_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + what + " file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path + ": not valid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(path + ": expected a JSON object");
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

// ---- config <-> json -------------------------------------------------------

SyntheticConfig synth_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"n_total_classes", "n_known_style", "raw_dim", "samples_per_class",
                         "cluster_spread", "pseudo_similarity_mix", "seed"},
                        "generator config");
    SyntheticConfig c;
    c.n_total_classes = j.value("n_total_classes", c.n_total_classes);
    c.n_known_style = j.value("n_known_style", c.n_known_style);
    c.raw_dim = j.value("raw_dim", c.raw_dim);
    c.samples_per_class = j.value("samples_per_class", c.samples_per_class);
    c.cluster_spread = j.value("cluster_spread", c.cluster_spread);
    c.pseudo_similarity_mix = j.value("pseudo_similarity_mix", c.pseudo_similarity_mix);
    c.seed = j.value("seed", c.seed);
    return c;
}

json synth_to_json(const SyntheticConfig& c) {
    return {{"n_total_classes", c.n_total_classes},
            {"n_known_style", c.n_known_style},
            {"raw_dim", c.raw_dim},
            {"samples_per_class", c.samples_per_class},
            {"cluster_spread", c.cluster_spread},
            {"pseudo_similarity_mix", c.pseudo_similarity_mix},
            {"seed", c.seed}};
}

EncoderConfig encoder_from_json(const json& j) {
    reject_unknown_keys(j, {"hidden_dims", "feature_dim", "activation"}, "encoder config");
    EncoderConfig c;
    if (j.contains("hidden_dims"))
        c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    if (j.contains("activation"))
        c.activation = activation_from_string(j.at("activation").get<std::string>());
    return c;
}

json encoder_to_json(const EncoderConfig& c) {
    return {{"input_dim", c.input_dim},
            {"hidden_dims", c.hidden_dims},
            {"feature_dim", c.feature_dim},
            {"activation", activation_name(c.activation)}};
}

ComponentToggles toggles_from_json(const json& j) {
    reject_unknown_keys(
        j, {"multi_projection", "use_l_f", "use_l_fb", "use_l_orth", "use_l_pb"},
        "component toggles");
    ComponentToggles t;
    t.multi_projection = j.value("multi_projection", t.multi_projection);
    t.use_l_f = j.value("use_l_f", t.use_l_f);
    t.use_l_fb = j.value("use_l_fb", t.use_l_fb);
    t.use_l_orth = j.value("use_l_orth", t.use_l_orth);
    t.use_l_pb = j.value("use_l_pb", t.use_l_pb);
    return t;
}

json toggles_to_json(const ComponentToggles& t) {
    return {{"multi_projection", t.multi_projection},
            {"use_l_f", t.use_l_f},
            {"use_l_fb", t.use_l_fb},
            {"use_l_orth", t.use_l_orth},
            {"use_l_pb", t.use_l_pb}};
}

LossWeights weights_from_json(const json& j) {
    reject_unknown_keys(j, {"lambda", "gamma", "alpha", "beta"}, "loss weights");
    LossWeights w;
    w.lambda = j.value("lambda", w.lambda);
    w.gamma = j.value("gamma", w.gamma);
    w.alpha = j.value("alpha", w.alpha);
    w.beta = j.value("beta", w.beta);
    return w;
}

json weights_to_json(const LossWeights& w) {
    return {{"lambda", w.lambda}, {"gamma", w.gamma}, {"alpha", w.alpha}, {"beta", w.beta}};
}

struct TrainSpec {
    EncoderConfig encoder;
    TrainConfig train;
};

TrainSpec trainspec_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"encoder", "learning_rate", "batch_size", "epochs",
                         "background_fraction", "eval_every", "loss_weights", "toggles",
                         "seed"},
                        "train config");
    TrainSpec s;
    if (j.contains("encoder")) s.encoder = encoder_from_json(j.at("encoder"));
    s.train.learning_rate = j.value("learning_rate", s.train.learning_rate);
    s.train.batch_size = j.value("batch_size", s.train.batch_size);
    s.train.epochs = j.value("epochs", s.train.epochs);
    s.train.background_fraction =
        j.value("background_fraction", s.train.background_fraction);
    s.train.eval_every = j.value("eval_every", s.train.eval_every);
    if (j.contains("loss_weights")) s.train.loss_weights = weights_from_json(j.at("loss_weights"));
    if (j.contains("toggles")) s.train.toggles = toggles_from_json(j.at("toggles"));
    s.train.seed = j.value("seed", s.train.seed);
    return s;
}

json trainspec_to_json(const TrainSpec& s) {
    return {{"encoder", encoder_to_json(s.encoder)},
            {"learning_rate", s.train.learning_rate},
            {"batch_size", s.train.batch_size},
            {"epochs", s.train.epochs},
            {"background_fraction", s.train.background_fraction},
            {"eval_every", s.train.eval_every},
            {"loss_weights", weights_to_json(s.train.loss_weights)},
            {"toggles", toggles_to_json(s.train.toggles)},
            {"seed", s.train.seed}};
}

// JSON has no literal for infinities; echo them in the same spelling the
// --threshold option parses back.
json threshold_json(double t) {
    if (std::isfinite(t)) return t;
    return t > 0 ? "inf" : "-inf";
}

json metrics_to_json(const MetricReport& m) {
    return {{"auroc", m.auroc},
            {"oscr", m.oscr},
            {"closed_acc", m.closed_acc},
            {"n_known", m.n_known},
            {"n_unknown", m.n_unknown}};
}

// ---- shared plumbing -------------------------------------------------------

struct CommonArgs {
    std::uint64_t seed = 0;
    std::string out = "out";
    std::string config;
    std::string dataset;
    std::string split;
    std::string checkpoint;
    double threshold = -std::numeric_limits<double>::infinity();
    std::string suite = "components";
    std::size_t n_seeds = 5;
    std::size_t window = 0;
    std::size_t stride = 16;
};

LabeledDataset load_dataset(const CommonArgs& a) {
    if (a.dataset.empty()) throw ConfigError("--dataset is required for this command");
    if (a.window > 0)
        return window_recordings(ingest_signal_csv(a.dataset), a.window, a.stride);
    return ingest_vector_csv(a.dataset);
}

void echo(const json& resolved) { std::cout << resolved.dump(2) << "\n"; }

Tensor rows_tensor(const LabeledDataset& ds, const std::vector<std::size_t>& idxs) {
    std::vector<double> flat;
    flat.reserve(idxs.size() * ds.dim());
    for (std::size_t i : idxs)
        for (std::size_t d = 0; d < ds.dim(); ++d) flat.push_back(ds.samples.at(i, d));
    return Tensor::from_data({idxs.size(), ds.dim()}, std::move(flat));
}

// ---- command bodies --------------------------------------------------------

int cmd_gen_data(const CommonArgs& a) {
    SyntheticConfig cfg;
    if (!a.config.empty()) cfg = synth_from_json(load_json_file(a.config, "generator config"));
    cfg.seed = a.seed;
    cfg.validate();
    LabeledDataset ds = generate_synthetic(cfg);
    std::filesystem::create_directories(a.out);
    std::string path = a.out + "/dataset.csv";
    save_dataset_csv(ds, path);
    echo({{"command", "gen-data"},
          {"config", synth_to_json(cfg)},
          {"out", path},
          {"n", ds.n()},
          {"dim", ds.dim()},
          {"classes", ds.n_classes()}});
    return 0;
}

int cmd_split(const CommonArgs& a) {
    LabeledDataset ds = load_dataset(a);
    std::size_t n_known = 8;
    double test_fraction = 0.3;
    SplitOptions opt;
    if (!a.config.empty()) {
        json j = load_json_file(a.config, "split config");
        reject_unknown_keys(
            j, {"n_known", "test_fraction", "background_in_test", "per_group"},
            "split config");
        n_known = j.value("n_known", n_known);
        test_fraction = j.value("test_fraction", test_fraction);
        opt.background_in_test = j.value("background_in_test", opt.background_in_test);
        opt.per_group = j.value("per_group", opt.per_group);
    }
    OpenSetSplit split = make_split(ds, n_known, test_fraction, a.seed, opt);
    std::filesystem::create_directories(a.out);
    std::string path = a.out + "/split.json";
    save_split_json(split, path);
    echo({{"command", "split"},
          {"dataset", a.dataset},
          {"n_known", n_known},
          {"test_fraction", test_fraction},
          {"background_in_test", opt.background_in_test},
          {"per_group", opt.per_group},
          {"seed", a.seed},
          {"out", path},
          {"known_class_ids", split.known_class_ids},
          {"background_class_id", split.background_class_id},
          {"unknown_class_ids", split.unknown_class_ids}});
    return 0;
}

int cmd_train(const CommonArgs& a) {
    LabeledDataset ds = load_dataset(a);
    if (a.split.empty()) throw ConfigError("--split is required for train");
    OpenSetSplit split = load_split_json(a.split);
    TrainSpec spec;
    if (!a.config.empty())
        spec = trainspec_from_json(load_json_file(a.config, "train config"));
    spec.encoder.input_dim = ds.dim();
    spec.train.seed = a.seed;

    std::filesystem::create_directories(a.out);
    json resolved{{"command", "train"},
                  {"dataset", a.dataset},
                  {"split", a.split},
                  {"out", a.out},
                  {"config", trainspec_to_json(spec)}};
    write_text_file(a.out + "/config.json", resolved.dump(2) + "\n");
    save_split_json(split, a.out + "/split.json");

    FitResult result = fit(ds, split, spec.encoder, spec.train, a.out);
    save_checkpoint(result.model, a.out + "/model.ckpt");

    const MetricReport& final_metrics = result.snapshots.back().metrics;
    resolved["steps"] = result.history.size();
    resolved["final_metrics"] = metrics_to_json(final_metrics);
    resolved["checkpoint"] = a.out + "/model.ckpt";
    echo(resolved);
    return 0;
}

void write_scored_csv(const std::string& path, const LabeledDataset& ds,
                      const OpenSetSplit& split, const std::vector<std::size_t>& idxs,
                      const std::vector<bool>& is_known,
                      const std::vector<ScoredSample>& scored, double threshold) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "sample,is_known,true_label,predicted_class,c_max,act_a,act_b,accepted\n";
    for (std::size_t i = 0; i < idxs.size(); ++i) {
        Decision d = decide(scored[i], threshold);
        out << idxs[i] << "," << (is_known[i] ? 1 : 0) << "," << ds.labels[idxs[i]] << ","
            << (is_known[i] ? split.remap_label(ds.labels[idxs[i]]) : kRejectClass) << ","
            << fmt(scored[i].c_max) << "," << fmt(scored[i].act_a) << ","
            << fmt(scored[i].act_b) << "," << (d.accepted ? 1 : 0) << "\n";
    }
}

void write_histogram_csv(const std::string& path, const HistogramPair& h) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    double width = (h.hi - h.lo) / static_cast<double>(h.known.size());
    out << "bin_lo,bin_hi,known_density,unknown_density\n";
    for (std::size_t b = 0; b < h.known.size(); ++b)
        out << fmt(h.lo + width * static_cast<double>(b)) << ","
            << fmt(h.lo + width * static_cast<double>(b + 1)) << "," << fmt(h.known[b])
            << "," << fmt(h.unknown[b]) << "\n";
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "fpr,ccr\n";
    for (const auto& p : curve) out << fmt(p.fpr) << "," << fmt(p.ccr) << "\n";
}

void write_confusion_csv(const std::string& path, const ProjectionConfusion& pc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "population,row,col,count\n";
    for (std::size_t r = 0; r < pc.n; ++r)
        for (std::size_t c = 0; c < pc.n; ++c) {
            out << "known," << r << "," << c << "," << pc.known[r * pc.n + c] << "\n";
        }
    for (std::size_t r = 0; r < pc.n; ++r)
        for (std::size_t c = 0; c < pc.n; ++c)
            out << "unknown," << r << "," << c << "," << pc.unknown[r * pc.n + c] << "\n";
}

int cmd_eval(const CommonArgs& a) {
    LabeledDataset ds = load_dataset(a);
    if (a.split.empty()) throw ConfigError("--split is required for eval");
    if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required for eval");
    OpenSetSplit split = load_split_json(a.split);
    DualBranchModel model = load_checkpoint(a.checkpoint);
    if (model.config.input_dim != ds.dim())
        throw DimError("checkpoint expects input_dim " +
                       std::to_string(model.config.input_dim) + ", dataset has " +
                       std::to_string(ds.dim()));

    std::vector<std::size_t> idxs;
    std::vector<bool> is_known;
    for (std::size_t i : split.test_known) {
        idxs.push_back(i);
        is_known.push_back(true);
    }
    for (std::size_t i : split.test_unknown) {
        idxs.push_back(i);
        is_known.push_back(false);
    }
    if (idxs.empty()) throw DataError("split has no test samples");
    auto scored = score_batch(model, rows_tensor(ds, idxs), ScoreMode::kDualBranch);

    std::vector<EvalRecord> records(idxs.size());
    std::vector<double> act_known, act_unknown;
    for (std::size_t i = 0; i < idxs.size(); ++i) {
        records[i].is_known = is_known[i];
        if (is_known[i]) records[i].true_class = split.remap_label(ds.labels[idxs[i]]);
        records[i].predicted_class = static_cast<int>(scored[i].k_star);
        records[i].score = scored[i].c_max;
        records[i].act = scored[i].act_a + scored[i].act_b;
        (is_known[i] ? act_known : act_unknown).push_back(records[i].act);
    }
    MetricReport report = evaluate(records);
    HistogramPair hist = activation_histogram(act_known, act_unknown);
    ProjectionConfusion confusion = projection_confusion(
        model, rows_tensor(ds, split.test_known), rows_tensor(ds, split.test_unknown));

    std::filesystem::create_directories(a.out);
    write_scored_csv(a.out + "/scored_samples.csv", ds, split, idxs, is_known, scored,
                     a.threshold);
    write_histogram_csv(a.out + "/activation_histogram.csv", hist);
    write_curve_csv(a.out + "/ccr_fpr_curve.csv", report.ccr_fpr_curve);
    write_confusion_csv(a.out + "/projection_confusion.csv", confusion);

    json out_metrics = metrics_to_json(report);
    out_metrics["activation_overlap"] = hist.overlap;
    out_metrics["known_diag"] = confusion.known_diag;
    out_metrics["unknown_diag"] = confusion.unknown_diag;
    write_text_file(a.out + "/metrics.json", out_metrics.dump(2) + "\n");

    echo({{"command", "eval"},
          {"dataset", a.dataset},
          {"split", a.split},
          {"checkpoint", a.checkpoint},
          {"threshold", threshold_json(a.threshold)},
          {"out", a.out},
          {"metrics", out_metrics}});
    return 0;
}

int cmd_ablate(const CommonArgs& a) {
    if (a.suite != "components")
        throw ConfigError("unknown suite \"" + a.suite + "\" (available: components)");
    if (a.n_seeds == 0) throw ConfigError("--seeds must be at least 1");
    LabeledDataset ds = load_dataset(a);
    if (a.split.empty()) throw ConfigError("--split is required for ablate");
    OpenSetSplit split = load_split_json(a.split);
    TrainSpec spec;
    if (!a.config.empty())
        spec = trainspec_from_json(load_json_file(a.config, "train config"));
    spec.encoder.input_dim = ds.dim();

    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < a.n_seeds; ++i) seeds.push_back(a.seed + i);
    auto rows = run_ablation(ds, split, spec.encoder, spec.train, component_suite(), seeds);

    std::filesystem::create_directories(a.out);
    std::string path = a.out + "/ablation.csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "configuration,multi_projection,use_l_f,use_l_fb,use_l_orth,use_l_pb,"
           "auroc_mean,auroc_std,oscr_mean,oscr_std,acc_mean,acc_std,failed_cells\n";
    for (const auto& row : rows) {
        std::size_t failed = 0;
        for (const auto& c : row.cells)
            if (c.failed) ++failed;
        out << row.toggles.name() << "," << row.toggles.multi_projection << ","
            << row.toggles.use_l_f << "," << row.toggles.use_l_fb << ","
            << row.toggles.use_l_orth << "," << row.toggles.use_l_pb << ","
            << fmt(row.mean_auroc) << "," << fmt(row.std_auroc) << ","
            << fmt(row.mean_oscr) << "," << fmt(row.std_oscr) << "," << fmt(row.mean_acc)
            << "," << fmt(row.std_acc) << "," << failed << "\n";
    }
    out.close();

    echo({{"command", "ablate"},
          {"dataset", a.dataset},
          {"split", a.split},
          {"suite", a.suite},
          {"seeds", seeds},
          {"config", trainspec_to_json(spec)},
          {"out", path}});
    return 0;
}

int cmd_gradcheck(const CommonArgs& a) {
    auto results = run_gradcheck_suite(a.seed, 10);
    bool ok = true;
    for (const auto& r : results) {
        bool pass = r.max_rel_err < gradcheck_tolerance();
        ok = ok && pass;
        std::printf("%-36s max_rel_err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                    pass ? "ok" : "FAIL");
    }
    echo({{"command", "gradcheck"},
          {"seed", a.seed},
          {"tolerance", gradcheck_tolerance()},
          {"passed", ok}});
    if (!ok) throw NumericError("gradient check exceeded tolerance");
    return 0;
}

int cmd_score(const CommonArgs& a) {
    LabeledDataset ds = load_dataset(a);
    if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required for score");
    DualBranchModel model = load_checkpoint(a.checkpoint);
    if (model.config.input_dim != ds.dim())
        throw DimError("checkpoint expects input_dim " +
                       std::to_string(model.config.input_dim) + ", dataset has " +
                       std::to_string(ds.dim()));

    std::vector<std::size_t> idxs(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) idxs[i] = i;
    auto scored = score_batch(model, ds.samples, ScoreMode::kDualBranch);

    std::filesystem::create_directories(a.out);
    std::string path = a.out + "/scores.csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "sample,label,predicted_class,c_max,act_a,act_b,accepted\n";
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        Decision d = decide(scored[i], a.threshold);
        accepted += d.accepted ? 1 : 0;
        out << i << "," << ds.labels[i] << ","
            << (d.accepted ? d.predicted_class : kRejectClass) << ","
            << fmt(scored[i].c_max) << "," << fmt(scored[i].act_a) << ","
            << fmt(scored[i].act_b) << "," << (d.accepted ? 1 : 0) << "\n";
    }
    out.close();

    echo({{"command", "score"},
          {"dataset", a.dataset},
          {"checkpoint", a.checkpoint},
          {"threshold", threshold_json(a.threshold)},
          {"out", path},
          {"n", scored.size()},
          {"accepted", accepted}});
    return 0;
}

} // namespace

int cli_main(int argc, const char** argv) {
    CLI::App app{"Open-set recognition with dual-branch prototype learning"};
    app.require_subcommand(1);

    CommonArgs a;
    auto add_common = [&](CLI::App* cmd, bool with_data) {
        cmd->add_option("--seed", a.seed, "Base RNG seed")->capture_default_str();
        cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
        cmd->add_option("--config", a.config, "JSON config file");
        if (with_data) {
            cmd->add_option("--dataset", a.dataset, "Dataset CSV (label,f1..fd)");
            cmd->add_option("--window", a.window,
                            "Treat --dataset as a long signal CSV and cut windows of "
                            "this length (0 = vector CSV)")
                ->capture_default_str();
            cmd->add_option("--stride", a.stride, "Window stride for --window")
                ->capture_default_str();
        }
    };

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic open-set dataset");
    add_common(gen, false);

    auto* split = app.add_subcommand("split", "Create an open-set train/test split");
    add_common(split, true);

    auto* train = app.add_subcommand("train", "Train a model on a split");
    add_common(train, true);
    train->add_option("--split", a.split, "Split JSON from the split command");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split's test data");
    add_common(eval, true);
    eval->add_option("--split", a.split, "Split JSON from the split command");
    eval->add_option("--checkpoint", a.checkpoint, "Model checkpoint");
    eval->add_option("--threshold", a.threshold,
                     "Acceptance threshold for the scored-sample export");

    auto* ablate = app.add_subcommand("ablate", "Train every component configuration");
    add_common(ablate, true);
    ablate->add_option("--split", a.split, "Split JSON from the split command");
    ablate->add_option("--suite", a.suite, "Configuration suite name")
        ->capture_default_str();
    ablate->add_option("--seeds", a.n_seeds, "Number of seeds (base --seed upward)")
        ->capture_default_str();

    auto* grad = app.add_subcommand("gradcheck", "Verify loss gradients numerically");
    grad->add_option("--seed", a.seed, "Base RNG seed")->capture_default_str();

    auto* score = app.add_subcommand("score", "Score every dataset row with a checkpoint");
    add_common(score, true);
    score->add_option("--checkpoint", a.checkpoint, "Model checkpoint");
    score->add_option("--threshold", a.threshold, "Acceptance threshold")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(a);
        if (split->parsed()) return cmd_split(a);
        if (train->parsed()) return cmd_train(a);
        if (eval->parsed()) return cmd_eval(a);
        if (ablate->parsed()) return cmd_ablate(a);
        if (grad->parsed()) return cmd_gradcheck(a);
        if (score->parsed()) return cmd_score(a);
    } catch (const std::exception& e) {
        const char* kind = "internal";
        int code = 2;
        if (dynamic_cast<const NumericError*>(&e)) {
            kind = "numeric";
            code = 3;
        } else if (dynamic_cast<const ConfigError*>(&e)) {
            kind = "config";
        } else if (dynamic_cast<const DimError*>(&e)) {
            kind = "dim";
        } else if (dynamic_cast<const DataError*>(&e)) {
            kind = "data";
        }
        std::cerr << "error: " << e.what() << "\n";
        std::cout << json{{"error", {{"kind", kind}, {"message", e.what()}}}}.dump()
                  << "\n";
        return code;
    }
    return 1;
}

} // namespace osr
