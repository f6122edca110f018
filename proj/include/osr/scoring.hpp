#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "osr/model.hpp"

namespace osr {

// Marker used in place of a class index when a sample is rejected.
constexpr int kRejectClass = -1;

// Which branches contribute to the combined confidence. Single-projection
// baselines and ablations score with branch A alone.
enum class ScoreMode { kDualBranch, kBranchAOnly };

struct ScoredSample {
    std::vector<double> sim_a, sim_b; // per-class similarities
    double act_a = 0, act_b = 0;      // feature activation |z|_1 per branch
    std::vector<double> c;            // combined per-class confidence
    double c_max = 0;
    std::size_t k_star = 0; // argmax of c, lowest index on ties
};

// c[k] = sim_a[k]*act_a + sim_b[k]*act_b (branch B dropped in A-only mode).
std::vector<double> combine_confidence(const std::vector<double>& sim_a, double act_a,
                                       const std::vector<double>& sim_b, double act_b);

std::size_t argmax_lowest(const std::vector<double>& v);

ScoredSample score_sample(const DualBranchModel& model, const Tensor& x,
                          ScoreMode mode = ScoreMode::kDualBranch);

// Row-wise scoring of xs [n x input_dim].
std::vector<ScoredSample> score_batch(const DualBranchModel& model, const Tensor& xs,
                                      ScoreMode mode = ScoreMode::kDualBranch);

struct Decision {
    bool accepted = false;
    int predicted_class = kRejectClass;
    double threshold = 0;
};

// Accepts strictly above the threshold; equality rejects.
Decision decide(const ScoredSample& s, double threshold);

// Empirical lower-interpolation quantile of validation scores at `target`,
// so roughly (1 - target) of known validation samples are accepted.
double calibrate_threshold(std::vector<double> scores_known_validation, double target);

enum class BaselineKind { kSoftmaxConfidence, kPlSimilarity };

BaselineKind baseline_from_string(const std::string& name);
std::string baseline_name(BaselineKind kind);

// Reference single-branch scores: max softmax probability over similarity
// logits, or the raw max similarity. One scalar per row of xs.
std::vector<double> baseline_scores(BaselineKind kind, const DualBranchModel& model,
                                    const Tensor& xs);

} // namespace osr
