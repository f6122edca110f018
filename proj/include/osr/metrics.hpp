#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "osr/model.hpp"
#include "osr/scoring.hpp"

namespace osr {

struct EvalRecord {
    bool is_known = false;
    int true_class = kRejectClass; // meaningful only for known records
    int predicted_class = kRejectClass;
    double score = 0; // detection score (higher = more confidently known)
    double act = 0;   // feature activation, kept for histogram diagnostics
};

struct CurvePoint {
    double fpr = 0;
    double ccr = 0;
};

struct MetricReport {
    double auroc = 0;
    double oscr = 0;
    double closed_acc = 0;
    std::vector<CurvePoint> ccr_fpr_curve;
    std::size_t n_known = 0;
    std::size_t n_unknown = 0;
};

// Probability that a random known sample outscores a random unknown one,
// ties counted half. Rank-based, O(n log n).
double auroc(const std::vector<EvalRecord>& records);

// Area under the correct-classification-rate vs false-positive-rate curve,
// swept over every observed score plus both infinities, strict score > t,
// right-step rectangle integration.
std::pair<double, std::vector<CurvePoint>> oscr(const std::vector<EvalRecord>& records);

// Fraction of known records whose prediction is right; scores ignored.
double closed_acc(const std::vector<EvalRecord>& records);

MetricReport evaluate(const std::vector<EvalRecord>& records);

struct HistogramPair {
    double lo = 0, hi = 0;        // shared value range across both populations
    std::vector<double> known;    // per-bin densities (mass / bin width)
    std::vector<double> unknown;
    double overlap = 0;           // sum over bins of min(known mass, unknown mass)
};

HistogramPair activation_histogram(const std::vector<double>& known,
                                   const std::vector<double>& unknown,
                                   std::size_t bins = 50);

struct ProjectionConfusion {
    std::size_t n = 0;                  // known-class count (matrix is n x n)
    std::vector<std::size_t> known;     // row-major counts, row = branch A argmax
    std::vector<std::size_t> unknown;   //                  col = branch B argmax
    double known_diag = 0;              // fraction of the population on the diagonal
    double unknown_diag = 0;
};

// Cross-branch projection agreement: each sample lands in cell
// (argmax branch-A score, argmax branch-B score).
ProjectionConfusion projection_confusion(const DualBranchModel& model, const Tensor& known_x,
                                         const Tensor& unknown_x);

} // namespace osr
