#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osr/data.hpp"
#include "osr/losses.hpp"
#include "osr/metrics.hpp"
#include "osr/model.hpp"
#include "osr/rng.hpp"
#include "osr/scoring.hpp"

namespace osr {

// Which pieces of the method are active. The six standard rows of
// component_suite() walk these from plain prototype learning up to the
// full dual-branch objective.
struct ComponentToggles {
    bool multi_projection = true; // two branches; off = branch A only
    bool use_l_f = true;
    bool use_l_fb = true;
    bool use_l_orth = true;
    bool use_l_pb = true;

    std::string name() const;
    TotalLossOptions loss_options() const;
    ScoreMode score_mode() const;
};

std::vector<ComponentToggles> component_suite();

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    std::size_t epochs = 50;
    // Fraction of each batch drawn from the background pool. Negative means
    // "resolve to 1/(N+1) from the split's known-class count".
    double background_fraction = -1.0;
    LossWeights loss_weights;
    ComponentToggles toggles;
    std::uint64_t seed = 0;
    std::size_t eval_every = 10; // epochs between snapshots; 0 = final only

    void validate() const;
    double resolved_background_fraction(std::size_t n_known_classes) const;
};

struct RunState {
    DualBranchModel model;
    std::size_t step = 0;
    std::vector<LossReport> history;
};

// Uniform-with-replacement draw: round(batch_size * fraction) background
// rows, the rest known rows with labels remapped to [0, N).
Batch sample_batch(const OpenSetSplit& split, const LabeledDataset& ds,
                   const TrainConfig& cfg, Rng& rng);

// In-place θ ← θ − lr * grad over every tensor that holds a gradient.
void sgd_apply(const std::vector<Tensor>& params, double lr);

// One optimization step: forward, backward, update, record. Throws
// NumericError naming the first non-finite loss term.
void sgd_step(RunState& state, const Batch& batch, const TrainConfig& cfg);

// Test-set records for the metrics pipeline: known test rows carry their
// remapped true class, unknown test rows only a score. The histogram
// activation is act_a (plus act_b when both branches score).
std::vector<EvalRecord> eval_records(const DualBranchModel& model, const LabeledDataset& ds,
                                     const OpenSetSplit& split, ScoreMode mode);

struct Snapshot {
    std::size_t epoch = 0;
    std::size_t step = 0;
    MetricReport metrics;
};

struct FitResult {
    DualBranchModel model;
    std::vector<LossReport> history;
    std::vector<Snapshot> snapshots;
};

// Full training run: init, epochs * (pool/batch) steps, periodic snapshots
// on the held-out test split. When run_dir is non-empty, steps stream to
// <run_dir>/steps.log and snapshots to <run_dir>/snapshots/ as they happen.
FitResult fit(const LabeledDataset& ds, const OpenSetSplit& split,
              const EncoderConfig& encoder, const TrainConfig& cfg,
              const std::string& run_dir = "");

struct AblationCell {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    MetricReport metrics;
};

struct AblationRow {
    ComponentToggles toggles;
    std::vector<AblationCell> cells;
    double mean_auroc = 0, std_auroc = 0;
    double mean_oscr = 0, std_oscr = 0;
    double mean_acc = 0, std_acc = 0;
};

// Trains every (toggles, seed) cell and reports mean/std over the seeds.
// A failed cell is recorded and skipped in the aggregates; the suite
// continues.
std::vector<AblationRow> run_ablation(const LabeledDataset& ds, const OpenSetSplit& split,
                                      const EncoderConfig& encoder, const TrainConfig& base,
                                      const std::vector<ComponentToggles>& suite,
                                      const std::vector<std::uint64_t>& seeds);

// The synthetic open-set benchmark used by the experiment commands: a
// fixed class layout (independent known-style clusters first, background
// and pseudo-similar unknowns after) with a stratified sample split.
struct BenchmarkConfig {
    SyntheticConfig synth;
    double test_fraction = 0.3;
    EncoderConfig encoder;
    TrainConfig train;
};

BenchmarkConfig default_benchmark();

// Deterministic split for the benchmark layout: classes [0, n_known_style)
// are known, n_known_style is background, the rest are unknown.
OpenSetSplit benchmark_split(const LabeledDataset& ds, const SyntheticConfig& synth,
                             double test_fraction, std::uint64_t seed);

} // namespace osr
