#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osr/tensor.hpp"

namespace osr {

struct LabeledDataset {
    Tensor samples;           // n x input_dim, plain values
    std::vector<int> labels;  // class ids, 0-based
    std::vector<std::string> class_names; // optional
    std::vector<int> group_ids;           // optional per-sample group (e.g. trial)
    std::string provenance;               // JSON: generator config or source + seed

    std::size_t n() const { return samples.defined() ? samples.rows() : 0; }
    std::size_t dim() const { return samples.defined() ? samples.cols() : 0; }
    std::size_t n_classes() const;
    void validate() const;
};

struct OpenSetSplit {
    std::vector<int> known_class_ids;   // sorted
    int background_class_id = -1;
    std::vector<int> unknown_class_ids; // sorted
    std::vector<std::size_t> train_known;
    std::vector<std::size_t> test_known;
    std::vector<std::size_t> train_background;
    std::vector<std::size_t> test_unknown;
    std::uint64_t seed = 0;
    bool background_in_test = false;

    // Position of `class_id` in known_class_ids: the training label space.
    int remap_label(int class_id) const;
};

struct SignalRecording {
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<double> values; // row-major channels x length
    int label = -1;
    int trial = -1;
    int subject = -1;

    double at(std::size_t c, std::size_t t) const { return values[c * length + t]; }
};

struct SyntheticConfig {
    std::size_t n_total_classes = 13;
    std::size_t n_known_style = 8; // classes below this id get independent means
    std::size_t raw_dim = 24;
    std::size_t samples_per_class = 200;
    double cluster_spread = 0.3;
    double pseudo_similarity_mix = 0.7; // how strongly the remaining classes
                                        // lean toward pairs of known means
    std::uint64_t seed = 0;

    void validate() const;
};

// Gaussian clusters: one unit-norm mean per known-style class; every other
// class centers on mix * (convex blend of two known-style means)
// + (1 - mix) * a fresh unit direction.
LabeledDataset generate_synthetic(const SyntheticConfig& config);

// The exact cluster means generate_synthetic uses, one row per class.
std::vector<std::vector<double>> synthetic_class_means(const SyntheticConfig& config);

// Windows at offsets 0, stride, 2*stride, ... while offset + win <= length.
// Each window is flattened row-major to channels * win values.
std::vector<std::vector<double>> sliding_window(const SignalRecording& rec, std::size_t win,
                                                std::size_t stride);

// Applies sliding_window to every recording; group id = trial.
LabeledDataset window_recordings(const std::vector<SignalRecording>& recs, std::size_t win,
                                 std::size_t stride);

// Long signal schema: header "subject,trial,label,t,ch1..chC"; one recording
// per distinct (subject, trial, label), rows ordered by t.
std::vector<SignalRecording> ingest_signal_csv(const std::string& path);

// Vector schema: header "label,f1..fd".
LabeledDataset ingest_vector_csv(const std::string& path);

void save_dataset_csv(const LabeledDataset& ds, const std::string& path);

struct SplitOptions {
    bool background_in_test = false; // also split background samples into
                                     // train_background / test_unknown
    bool per_group = false;          // split known classes by whole groups
};

// Randomly selects n_known known classes and one background class; the rest
// are unknown. Known samples split train/test stratified per class; all
// unknown-class samples go to test.
OpenSetSplit make_split(const LabeledDataset& ds, std::size_t n_known, double test_fraction,
                        std::uint64_t seed, const SplitOptions& opt = {});

void save_split_json(const OpenSetSplit& split, const std::string& path);
OpenSetSplit load_split_json(const std::string& path);

} // namespace osr
