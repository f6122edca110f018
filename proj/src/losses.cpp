#include "osr/losses.hpp"

#include <string>

#include "osr/errors.hpp"

namespace osr {

namespace {

void check_labels(const std::vector<int>& labels, std::size_t n_rows, std::size_t n_classes) {
    if (labels.size() != n_rows)
        throw DataError("have " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n_rows) + " rows");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
            throw DataError("label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside [0, " +
                            std::to_string(n_classes) + ")");
}

struct BranchTerms {
    Tensor eps, f, fb; // fb only defined when background is active
    Tensor z_bg;       // background embeddings (when computed)
    Tensor sim_bg;     // background similarities (when computed)
};

BranchTerms branch_terms(const Branch& branch, const Batch& batch, bool want_f,
                         bool want_fb, bool want_bg_sim) {
    BranchTerms t;
    Tensor z = encode(branch, batch.known_x);
    t.eps = dce_loss(similarity_matrix(branch, z), batch.known_y);
    if (want_f) t.f = l_f(z, batch.known_y, branch.prototypes);
    bool bg_active = batch.m_b() > 0;
    if (bg_active && (want_fb || want_bg_sim)) {
        t.z_bg = encode(branch, batch.background_x);
        if (want_fb) t.fb = l_fb(t.z_bg, center_prototype(branch));
        if (want_bg_sim) t.sim_bg = similarity_matrix(branch, t.z_bg);
    }
    if (want_fb && !t.fb.defined()) t.fb = Tensor::scalar(0.0);
    return t;
}

} // namespace

void LossWeights::validate() const {
    if (lambda < 0 || gamma < 0 || alpha < 0 || beta < 0)
        throw ConfigError("loss weights must be non-negative");
}

Tensor dce_loss(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2)
        throw DimError("dce_loss expects 2-d logits, got " + shape_str(logits.shape()));
    check_labels(labels, logits.rows(), logits.cols());
    Tensor picked = gather(log_softmax(logits), labels);
    return mul_scalar(mean(picked), -1.0);
}

Tensor smooth_norm_loss(const Tensor& u) {
    double l1 = 0;
    for (double v : u.values()) l1 += std::abs(v);
    if (l1 < 1.0) return mul_scalar(l2_norm(u), 0.5);
    return add_scalar(l1_norm(u), -0.5);
}

Tensor l_f(const Tensor& z, const std::vector<int>& labels, const Tensor& prototypes) {
    if (z.ndim() != 2 || prototypes.ndim() != 2 || z.cols() != prototypes.cols())
        throw DimError("l_f: features " + shape_str(z.shape()) + " vs prototypes " +
                       shape_str(prototypes.shape()));
    check_labels(labels, z.rows(), prototypes.rows());
    std::size_t m = z.rows();
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < m; ++i) {
        Tensor u = sub(row(z, i), row(prototypes, static_cast<std::size_t>(labels[i])));
        acc = add(acc, smooth_norm_loss(u));
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(m));
}

Tensor l_fb(const Tensor& z_b, const Tensor& p_c) {
    std::size_t m_b = z_b.defined() ? z_b.rows() : 0;
    if (m_b == 0) return Tensor::scalar(0.0);
    if (z_b.cols() != p_c.size())
        throw DimError("l_fb: features " + shape_str(z_b.shape()) + " vs center " +
                       shape_str(p_c.shape()));
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < m_b; ++i)
        acc = add(acc, smooth_norm_loss(sub(row(z_b, i), p_c)));
    return mul_scalar(acc, 1.0 / static_cast<double>(m_b));
}

Tensor l_faem(const Branch& branch, const Batch& batch, const LossWeights& w) {
    w.validate();
    BranchTerms t = branch_terms(branch, batch, true, true, false);
    return add(t.eps, add(mul_scalar(t.f, w.lambda), mul_scalar(t.fb, w.gamma)));
}

Tensor l_orth(const Tensor& p_a, const Tensor& p_b) {
    if (p_a.shape() != p_b.shape() || p_a.ndim() != 2)
        throw DimError("l_orth: prototype shapes " + shape_str(p_a.shape()) + " vs " +
                       shape_str(p_b.shape()));
    // per-class dot product, squared, averaged
    return mean(square(sum_axis1(mul(p_a, p_b))));
}

std::vector<PenaltyEntry> penalty_set(const Tensor& sim_a, const Tensor& sim_b) {
    if (sim_a.shape() != sim_b.shape() || sim_a.ndim() != 2)
        throw DimError("penalty_set: similarity shapes " + shape_str(sim_a.shape()) +
                       " vs " + shape_str(sim_b.shape()));
    std::vector<PenaltyEntry> out;
    std::size_t rows = sim_a.rows(), cols = sim_a.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t ka = 0, kb = 0;
        for (std::size_t k = 1; k < cols; ++k) {
            if (sim_a.at(i, k) > sim_a.at(i, ka)) ka = k;
            if (sim_b.at(i, k) > sim_b.at(i, kb)) kb = k;
        }
        if (ka != kb) continue;
        char branch = sim_b.at(i, kb) > sim_a.at(i, ka) ? 'B' : 'A';
        out.push_back({i, branch, ka});
    }
    return out;
}

Tensor l_pb(const std::vector<PenaltyEntry>& selected, const Tensor& z_a,
            const Tensor& z_b, const Tensor& p_a, const Tensor& p_b) {
    if (selected.empty()) return Tensor::scalar(0.0);
    Tensor acc = Tensor::scalar(0.0);
    for (const PenaltyEntry& e : selected) {
        const Tensor& z = e.branch == 'A' ? z_a : z_b;
        const Tensor& p = e.branch == 'A' ? p_a : p_b;
        if (e.sample >= z.rows() || e.cls >= p.rows())
            throw DataError("penalty entry out of range (sample " +
                            std::to_string(e.sample) + ", class " +
                            std::to_string(e.cls) + ")");
        acc = add(acc, dot(row(z, e.sample), row(p, e.cls)));
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(selected.size()));
}

std::pair<Tensor, LossReport> total_loss(const DualBranchModel& model, const Batch& batch,
                                         const LossWeights& w, const TotalLossOptions& opt) {
    w.validate();
    if (batch.m() == 0) throw DataError("batch has no known samples");

    bool cross = !opt.single_branch;
    bool want_pb = cross && opt.use_l_pb && batch.m_b() > 0;

    BranchTerms ta = branch_terms(model.branch_a, batch, opt.use_l_f, opt.use_l_fb, want_pb);
    LossReport rep;
    rep.l_eps_a = ta.eps.value();
    Tensor total = ta.eps;
    if (opt.use_l_f) {
        rep.l_f_a = ta.f.value();
        total = add(total, mul_scalar(ta.f, w.lambda));
    }
    if (opt.use_l_fb) {
        rep.l_fb_a = ta.fb.value();
        total = add(total, mul_scalar(ta.fb, w.gamma));
    }

    if (cross) {
        BranchTerms tb = branch_terms(model.branch_b, batch, opt.use_l_f, opt.use_l_fb, want_pb);
        rep.l_eps_b = tb.eps.value();
        total = add(total, tb.eps);
        if (opt.use_l_f) {
            rep.l_f_b = tb.f.value();
            total = add(total, mul_scalar(tb.f, w.lambda));
        }
        if (opt.use_l_fb) {
            rep.l_fb_b = tb.fb.value();
            total = add(total, mul_scalar(tb.fb, w.gamma));
        }
        if (opt.use_l_orth) {
            Tensor orth = l_orth(model.branch_a.prototypes, model.branch_b.prototypes);
            rep.l_orth = orth.value();
            total = add(total, mul_scalar(orth, w.alpha));
        }
        if (want_pb) {
            std::vector<PenaltyEntry> local;
            const std::vector<PenaltyEntry>* sel = opt.frozen_penalty;
            if (!sel) {
                local = penalty_set(ta.sim_bg, tb.sim_bg);
                sel = &local;
            }
            rep.m_pb = sel->size();
            Tensor pb = l_pb(*sel, ta.z_bg, tb.z_bg, model.branch_a.prototypes,
                             model.branch_b.prototypes);
            rep.l_pb = pb.value();
            total = add(total, mul_scalar(pb, w.beta));
        }
    }

    rep.total = total.value();
    return {total, rep};
}

} // namespace osr
