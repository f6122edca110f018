#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "osr/model.hpp"
#include "osr/tensor.hpp"

namespace osr {

struct LossWeights {
    double lambda = 1.0; // known-feature alignment
    double gamma = 1.0;  // background-center alignment
    double alpha = 0.1;  // cross-branch prototype orthogonality
    double beta = 0.01;  // background penalty

    void validate() const;
};

struct Batch {
    Tensor known_x;           // M x input_dim
    std::vector<int> known_y; // labels in [0, N)
    Tensor background_x;      // M_b x input_dim; undefined or 0 rows disables
                              // the background terms for the step

    std::size_t m() const { return known_x.defined() ? known_x.rows() : 0; }
    std::size_t m_b() const { return background_x.defined() ? background_x.rows() : 0; }
};

// Raw (unweighted) value of every term plus the weighted total.
struct LossReport {
    double l_eps_a = 0, l_eps_b = 0;
    double l_f_a = 0, l_f_b = 0;
    double l_fb_a = 0, l_fb_b = 0;
    double l_orth = 0;
    double l_pb = 0;
    double total = 0;
    std::size_t m_pb = 0;
};

// Mean over rows of -log p(label | logits) with softmax over similarities.
Tensor dce_loss(const Tensor& logits, const std::vector<int>& labels);

// Piecewise alignment cost: 0.5*||u||_2 when ||u||_1 < 1, else ||u||_1 - 0.5.
Tensor smooth_norm_loss(const Tensor& u);

// Mean alignment of each embedding to its class prototype.
Tensor l_f(const Tensor& z, const std::vector<int>& labels, const Tensor& prototypes);

// Mean alignment of background embeddings to the prototype center.
// Empty z_b yields exactly 0.
Tensor l_fb(const Tensor& z_b, const Tensor& p_c);

// Single-branch composite: dce + lambda*l_f + gamma*l_fb on this branch.
Tensor l_faem(const Branch& branch, const Batch& batch, const LossWeights& w);

// Mean over classes of the squared cross-branch prototype dot product.
Tensor l_orth(const Tensor& p_a, const Tensor& p_b);

struct PenaltyEntry {
    std::size_t sample; // background row index
    char branch;        // 'A' or 'B'
    std::size_t cls;    // shared argmax class
};

// Background samples whose most-similar class agrees across branches.
// The chosen branch is the one with the larger similarity there; ties go
// to A. Selection reads values only: no gradient flows through it.
std::vector<PenaltyEntry> penalty_set(const Tensor& sim_a, const Tensor& sim_b);

// Mean over selected entries of the chosen branch's z . p_cls. Can be
// negative; empty selection yields exactly 0.
Tensor l_pb(const std::vector<PenaltyEntry>& selected, const Tensor& z_a,
            const Tensor& z_b, const Tensor& p_a, const Tensor& p_b);

struct TotalLossOptions {
    bool single_branch = false; // train/score branch A only; no cross-branch terms
    bool use_l_f = true;
    bool use_l_fb = true;
    bool use_l_orth = true;
    bool use_l_pb = true;
    // When set, reuse this selection instead of recomputing it from the
    // current similarities (used to hold the selection fixed while probing
    // gradients).
    const std::vector<PenaltyEntry>* frozen_penalty = nullptr;
};

// Full objective: l_faem on each active branch plus alpha*l_orth and
// beta*l_pb across branches. Disabled terms are not evaluated and are
// reported as 0.
std::pair<Tensor, LossReport> total_loss(const DualBranchModel& model, const Batch& batch,
                                         const LossWeights& w,
                                         const TotalLossOptions& opt = {});

} // namespace osr
