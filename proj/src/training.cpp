#include "osr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "osr/errors.hpp"

namespace osr {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void append_step_line(std::ofstream& log, std::size_t step, const LossReport& r) {
    log << "step=" << step << " l_eps_a=" << fmt(r.l_eps_a) << " l_eps_b=" << fmt(r.l_eps_b)
        << " l_f_a=" << fmt(r.l_f_a) << " l_f_b=" << fmt(r.l_f_b) << " l_fb_a="
        << fmt(r.l_fb_a) << " l_fb_b=" << fmt(r.l_fb_b) << " l_orth=" << fmt(r.l_orth)
        << " l_pb=" << fmt(r.l_pb) << " m_pb=" << r.m_pb << " total=" << fmt(r.total)
        << "\n";
}

nlohmann::json metrics_json(const MetricReport& m) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : m.ccr_fpr_curve) curve.push_back({p.fpr, p.ccr});
    return {{"auroc", m.auroc},       {"oscr", m.oscr},
            {"closed_acc", m.closed_acc}, {"n_known", m.n_known},
            {"n_unknown", m.n_unknown},   {"ccr_fpr_curve", curve}};
}

const char* first_non_finite(const LossReport& r) {
    if (!std::isfinite(r.l_eps_a)) return "l_eps_a";
    if (!std::isfinite(r.l_eps_b)) return "l_eps_b";
    if (!std::isfinite(r.l_f_a)) return "l_f_a";
    if (!std::isfinite(r.l_f_b)) return "l_f_b";
    if (!std::isfinite(r.l_fb_a)) return "l_fb_a";
    if (!std::isfinite(r.l_fb_b)) return "l_fb_b";
    if (!std::isfinite(r.l_orth)) return "l_orth";
    if (!std::isfinite(r.l_pb)) return "l_pb";
    if (!std::isfinite(r.total)) return "total";
    return nullptr;
}

Tensor rows_subset(const LabeledDataset& ds, const std::vector<std::size_t>& idxs) {
    std::vector<double> flat;
    flat.reserve(idxs.size() * ds.dim());
    for (std::size_t i : idxs)
        for (std::size_t d = 0; d < ds.dim(); ++d) flat.push_back(ds.samples.at(i, d));
    return Tensor::from_data({idxs.size(), ds.dim()}, std::move(flat));
}

} // namespace

std::string ComponentToggles::name() const {
    std::string s = multi_projection ? "mp" : "sp";
    if (use_l_f) s += "+lf";
    if (use_l_fb) s += "+lfb";
    if (multi_projection && use_l_orth) s += "+lorth";
    if (multi_projection && use_l_pb) s += "+lpb";
    return s;
}

TotalLossOptions ComponentToggles::loss_options() const {
    TotalLossOptions opt;
    opt.single_branch = !multi_projection;
    opt.use_l_f = use_l_f;
    opt.use_l_fb = use_l_fb;
    opt.use_l_orth = use_l_orth;
    opt.use_l_pb = use_l_pb;
    return opt;
}

ScoreMode ComponentToggles::score_mode() const {
    return multi_projection ? ScoreMode::kDualBranch : ScoreMode::kBranchAOnly;
}

std::vector<ComponentToggles> component_suite() {
    auto row = [](bool mp, bool lf, bool lfb, bool lorth, bool lpb) {
        ComponentToggles t;
        t.multi_projection = mp;
        t.use_l_f = lf;
        t.use_l_fb = lfb;
        t.use_l_orth = lorth;
        t.use_l_pb = lpb;
        return t;
    };
    return {
        row(false, false, false, false, false), // plain prototype learning
        row(false, true, false, false, false),
        row(false, true, true, false, false),   // single-branch activation enhancement
        row(true, true, true, false, false),
        row(true, true, true, true, false),
        row(true, true, true, true, true),      // full method
    };
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (background_fraction >= 1)
        throw ConfigError("background_fraction must be below 1");
    loss_weights.validate();
}

double TrainConfig::resolved_background_fraction(std::size_t n_known_classes) const {
    if (background_fraction >= 0) return background_fraction;
    return 1.0 / static_cast<double>(n_known_classes + 1);
}

Batch sample_batch(const OpenSetSplit& split, const LabeledDataset& ds,
                   const TrainConfig& cfg, Rng& rng) {
    if (split.train_known.empty()) throw DataError("known training pool is empty");
    double bf = cfg.resolved_background_fraction(split.known_class_ids.size());
    auto m_b = static_cast<std::size_t>(
        std::llround(static_cast<double>(cfg.batch_size) * bf));
    if (split.train_background.empty()) m_b = 0;
    if (m_b >= cfg.batch_size) m_b = cfg.batch_size - 1;
    std::size_t m = cfg.batch_size - m_b;

    Batch batch;
    std::vector<double> kx;
    kx.reserve(m * ds.dim());
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t idx = split.train_known[rng.bounded(split.train_known.size())];
        for (std::size_t d = 0; d < ds.dim(); ++d) kx.push_back(ds.samples.at(idx, d));
        batch.known_y.push_back(split.remap_label(ds.labels[idx]));
    }
    batch.known_x = Tensor::from_data({m, ds.dim()}, std::move(kx));

    if (m_b > 0) {
        std::vector<double> bx;
        bx.reserve(m_b * ds.dim());
        for (std::size_t i = 0; i < m_b; ++i) {
            std::size_t idx = split.train_background[rng.bounded(split.train_background.size())];
            for (std::size_t d = 0; d < ds.dim(); ++d) bx.push_back(ds.samples.at(idx, d));
        }
        batch.background_x = Tensor::from_data({m_b, ds.dim()}, std::move(bx));
    }
    return batch;
}

void sgd_apply(const std::vector<Tensor>& params, double lr) {
    if (lr == 0) return;
    for (const Tensor& t : params) {
        if (!t.has_grad()) continue;
        Tensor p = t;
        auto& v = p.values();
        const auto& g = t.grad();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    }
}

void sgd_step(RunState& state, const Batch& batch, const TrainConfig& cfg) {
    auto params = state.model.parameters();
    for (Tensor& p : params) p.zero_grad();

    auto [total, report] = total_loss(state.model, batch, cfg.loss_weights,
                                      cfg.toggles.loss_options());
    if (const char* term = first_non_finite(report))
        throw NumericError("loss term " + std::string(term) + " is non-finite at step " +
                           std::to_string(state.step));
    total.backward();
    sgd_apply(params, cfg.learning_rate);
    state.history.push_back(report);
    state.step += 1;
}

std::vector<EvalRecord> eval_records(const DualBranchModel& model, const LabeledDataset& ds,
                                     const OpenSetSplit& split, ScoreMode mode) {
    std::vector<EvalRecord> records;
    auto add = [&](const std::vector<std::size_t>& idxs, bool is_known) {
        if (idxs.empty()) return;
        Tensor xs = rows_subset(ds, idxs);
        auto scored = score_batch(model, xs, mode);
        for (std::size_t i = 0; i < idxs.size(); ++i) {
            EvalRecord r;
            r.is_known = is_known;
            if (is_known) r.true_class = split.remap_label(ds.labels[idxs[i]]);
            r.predicted_class = static_cast<int>(scored[i].k_star);
            r.score = scored[i].c_max;
            r.act = scored[i].act_a + scored[i].act_b;
            records.push_back(r);
        }
    };
    add(split.test_known, true);
    add(split.test_unknown, false);
    return records;
}

FitResult fit(const LabeledDataset& ds, const OpenSetSplit& split,
              const EncoderConfig& encoder, const TrainConfig& cfg,
              const std::string& run_dir) {
    cfg.validate();
    ds.validate();
    if (encoder.input_dim != ds.dim())
        throw ConfigError("encoder input_dim " + std::to_string(encoder.input_dim) +
                          " does not match dataset dim " + std::to_string(ds.dim()));
    if (split.known_class_ids.size() < 2) throw DataError("split has fewer than 2 known classes");

    std::ofstream steps_log;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir + "/snapshots");
        steps_log.open(run_dir + "/steps.log", std::ios::trunc);
        if (!steps_log) throw DataError("cannot open " + run_dir + "/steps.log");
    }

    RunState state;
    state.model = init_model(encoder, split.known_class_ids.size(), cfg.seed);
    Rng batch_rng(derive_seed(cfg.seed, 2));

    std::size_t pool = split.train_known.size() + split.train_background.size();
    std::size_t steps_per_epoch = std::max<std::size_t>(1, pool / cfg.batch_size);

    FitResult result;
    auto snapshot = [&](std::size_t epoch) {
        Snapshot snap;
        snap.epoch = epoch;
        snap.step = state.step;
        snap.metrics = evaluate(eval_records(state.model, ds, split, cfg.toggles.score_mode()));
        result.snapshots.push_back(snap);
        if (!run_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "/snapshots/epoch_%04zu.json", epoch);
            nlohmann::json j{{"epoch", snap.epoch},
                             {"step", snap.step},
                             {"metrics", metrics_json(snap.metrics)}};
            std::ofstream out(run_dir + name, std::ios::trunc);
            out << j.dump(2) << "\n";
        }
    };

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            Batch batch = sample_batch(split, ds, cfg, batch_rng);
            sgd_step(state, batch, cfg);
            if (steps_log.is_open()) {
                append_step_line(steps_log, state.step - 1, state.history.back());
                steps_log.flush();
            }
        }
        bool last = epoch == cfg.epochs;
        if (last || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0)) snapshot(epoch);
    }

    result.model = state.model;
    result.history = std::move(state.history);
    return result;
}

std::vector<AblationRow> run_ablation(const LabeledDataset& ds, const OpenSetSplit& split,
                                      const EncoderConfig& encoder, const TrainConfig& base,
                                      const std::vector<ComponentToggles>& suite,
                                      const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
    std::vector<AblationRow> rows;
    for (const ComponentToggles& toggles : suite) {
        AblationRow row;
        row.toggles = toggles;
        for (std::uint64_t seed : seeds) {
            AblationCell cell;
            cell.seed = seed;
            TrainConfig cfg = base;
            cfg.toggles = toggles;
            cfg.seed = seed;
            cfg.eval_every = 0; // final snapshot only
            try {
                FitResult r = fit(ds, split, encoder, cfg);
                cell.metrics = r.snapshots.empty()
                                   ? evaluate(eval_records(r.model, ds, split,
                                                           toggles.score_mode()))
                                   : r.snapshots.back().metrics;
            } catch (const Error& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            row.cells.push_back(std::move(cell));
        }

        auto aggregate = [&](auto pick, double& mean, double& sd) {
            std::vector<double> vals;
            for (const auto& c : row.cells)
                if (!c.failed) vals.push_back(pick(c.metrics));
            if (vals.empty()) return;
            double s = 0;
            for (double v : vals) s += v;
            mean = s / static_cast<double>(vals.size());
            if (vals.size() > 1) {
                double q = 0;
                for (double v : vals) q += (v - mean) * (v - mean);
                sd = std::sqrt(q / static_cast<double>(vals.size() - 1));
            }
        };
        aggregate([](const MetricReport& m) { return m.auroc; }, row.mean_auroc, row.std_auroc);
        aggregate([](const MetricReport& m) { return m.oscr; }, row.mean_oscr, row.std_oscr);
        aggregate([](const MetricReport& m) { return m.closed_acc; }, row.mean_acc, row.std_acc);
        rows.push_back(std::move(row));
    }
    return rows;
}

BenchmarkConfig default_benchmark() {
    BenchmarkConfig b;
    b.synth.n_total_classes = 13; // 8 known + background + 4 unknown
    b.synth.n_known_style = 8;
    b.synth.raw_dim = 24;
    b.synth.samples_per_class = 200;
    b.synth.cluster_spread = 0.25;
    b.synth.pseudo_similarity_mix = 0.7;
    b.test_fraction = 0.3;

    b.encoder.input_dim = 24;
    b.encoder.hidden_dims = {64, 64};
    b.encoder.feature_dim = 32;
    b.encoder.activation = Activation::kRelu;

    b.train.learning_rate = 0.01;
    b.train.batch_size = 64;
    // Long enough for the cross-branch agreement gap and the orthogonality
    // decay to stabilize; the run stays in the seconds range at this scale.
    b.train.epochs = 200;
    b.train.eval_every = 0;
    return b;
}

OpenSetSplit benchmark_split(const LabeledDataset& ds, const SyntheticConfig& synth,
                             double test_fraction, std::uint64_t seed) {
    ds.validate();
    if (!(test_fraction > 0 && test_fraction < 1))
        throw ConfigError("test_fraction must lie in (0, 1)");
    if (synth.n_known_style + 2 > synth.n_total_classes)
        throw ConfigError("benchmark layout needs a background and at least one unknown class");

    OpenSetSplit split;
    split.seed = seed;
    for (std::size_t c = 0; c < synth.n_known_style; ++c)
        split.known_class_ids.push_back(static_cast<int>(c));
    split.background_class_id = static_cast<int>(synth.n_known_style);
    for (std::size_t c = synth.n_known_style + 1; c < synth.n_total_classes; ++c)
        split.unknown_class_ids.push_back(static_cast<int>(c));

    Rng rng(seed);
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.n(); ++i) by_class[ds.labels[i]].push_back(i);
    for (int cid : split.known_class_ids) {
        auto pool = by_class[cid];
        if (pool.size() < 2)
            throw DataError("class " + std::to_string(cid) + " has fewer than 2 samples");
        rng.shuffle(pool);
        auto target = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(pool.size())));
        target = std::clamp<std::size_t>(target, 1, pool.size() - 1);
        split.test_known.insert(split.test_known.end(), pool.begin(), pool.begin() + target);
        split.train_known.insert(split.train_known.end(), pool.begin() + target, pool.end());
    }
    split.train_background = by_class[split.background_class_id];
    for (int cid : split.unknown_class_ids) {
        const auto& idxs = by_class[cid];
        split.test_unknown.insert(split.test_unknown.end(), idxs.begin(), idxs.end());
    }
    std::sort(split.train_known.begin(), split.train_known.end());
    std::sort(split.test_known.begin(), split.test_known.end());
    std::sort(split.test_unknown.begin(), split.test_unknown.end());
    return split;
}

} // namespace osr
