#include "osr/gradcheck_suite.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "osr/errors.hpp"
#include "osr/losses.hpp"
#include "osr/model.hpp"
#include "osr/rng.hpp"

namespace osr {

namespace {

constexpr double kStep = 1e-5;
// A probe shifts each checked coordinate by kStep; these margins keep every
// piecewise boundary of smooth_norm_loss strictly out of reach of the
// perturbed evaluations.
constexpr double kRegimeMargin = 1e-2;   // distance of |u|_1 from 1
constexpr double kCoordMargin = 1e-3;    // distance of each u_i from 0

std::vector<Tensor*> param_ptrs(DualBranchModel& m) {
    std::vector<Tensor*> out;
    for (Branch* br : {&m.branch_a, &m.branch_b}) {
        for (Tensor& t : br->hidden_w) out.push_back(&t);
        for (Tensor& t : br->hidden_b) out.push_back(&t);
        out.push_back(&br->out_w);
        out.push_back(&br->prototypes);
    }
    return out;
}

DualBranchModel deep_copy(const DualBranchModel& m) {
    DualBranchModel c = m;
    for (Tensor* t : param_ptrs(c)) *t = Tensor::param(t->shape(), t->values());
    return c;
}

// One random probing point: a small smooth model plus a batch.
struct Point {
    DualBranchModel model;
    Batch batch;
    std::vector<PenaltyEntry> penalty;
};

Tensor rand_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.gauss();
    return Tensor::from_data({rows, cols}, std::move(v));
}

// The alignment cost is piecewise; reject draws whose argument sits near a
// boundary (regime switch at |u|_1 = 1, coordinate kinks at u_i = 0 in the
// linear regime, the origin in the quadratic one).
bool u_clears_margins(const std::vector<double>& u) {
    double l1 = 0;
    for (double x : u) l1 += std::abs(x);
    if (std::abs(l1 - 1.0) < kRegimeMargin) return false;
    if (l1 > 1.0) {
        for (double x : u) {
            if (std::abs(x) < kCoordMargin) return false;
        }
    } else if (l1 < kCoordMargin) {
        return false;
    }
    return true;
}

bool point_is_clear(const Point& pt) {
    for (const Branch* br : {&pt.model.branch_a, &pt.model.branch_b}) {
        Tensor z = encode(*br, pt.batch.known_x);
        std::size_t d = z.cols();
        for (std::size_t i = 0; i < z.rows(); ++i) {
            std::vector<double> u(d);
            for (std::size_t j = 0; j < d; ++j)
                u[j] = z.at(i, j) - br->prototypes.at(pt.batch.known_y[i], j);
            if (!u_clears_margins(u)) return false;
        }
        Tensor zb = encode(*br, pt.batch.background_x);
        Tensor pc = center_prototype(*br);
        for (std::size_t i = 0; i < zb.rows(); ++i) {
            std::vector<double> u(d);
            for (std::size_t j = 0; j < d; ++j) u[j] = zb.at(i, j) - pc.values()[j];
            if (!u_clears_margins(u)) return false;
        }
    }
    return true;
}

Point draw_point(std::uint64_t seed) {
    EncoderConfig cfg;
    cfg.input_dim = 5;
    cfg.hidden_dims = {6};
    cfg.feature_dim = 4;
    cfg.activation = Activation::kTanh; // smooth everywhere
    const std::size_t n_classes = 3;

    for (std::uint64_t attempt = 0; attempt < 256; ++attempt) {
        std::uint64_t s = derive_seed(seed, attempt);
        Point pt;
        pt.model = init_model(cfg, n_classes, s);
        Rng rng(derive_seed(s, 1));
        pt.batch.known_x = rand_matrix(rng, 4, cfg.input_dim);
        pt.batch.known_y = {0, 1, 2, static_cast<int>(rng.bounded(n_classes))};
        pt.batch.background_x = rand_matrix(rng, 3, cfg.input_dim);
        if (!point_is_clear(pt)) continue;
        Tensor zba = encode(pt.model.branch_a, pt.batch.background_x);
        Tensor zbb = encode(pt.model.branch_b, pt.batch.background_x);
        pt.penalty = penalty_set(similarity_matrix(pt.model.branch_a, zba),
                                 similarity_matrix(pt.model.branch_b, zbb));
        if (pt.penalty.empty()) continue; // selection-dependent losses need entries
        return pt;
    }
    throw NumericError("could not draw a gradient-check point clear of all kinks");
}

using LossFn = std::function<Tensor(const DualBranchModel&, const Point&)>;

double check_loss_at(const LossFn& fn, const Point& pt) {
    double worst = 0;
    DualBranchModel base = deep_copy(pt.model);
    auto ptrs = param_ptrs(base);
    for (std::size_t j = 0; j < ptrs.size(); ++j) {
        Tensor original = *ptrs[j];
        auto f = [&](const Tensor& probe) {
            DualBranchModel m =
                base; // shares every leaf except the probed one
            *param_ptrs(m)[j] = probe;
            return fn(m, pt);
        };
        worst = std::max(worst, grad_check(f, original, kStep));
    }
    return worst;
}

} // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, std::size_t points) {
    LossWeights w;
    std::vector<std::pair<std::string, LossFn>> checks;
    checks.emplace_back("classification", [](const DualBranchModel& m, const Point& pt) {
        Tensor z = encode(m.branch_a, pt.batch.known_x);
        return dce_loss(similarity_matrix(m.branch_a, z), pt.batch.known_y);
    });
    checks.emplace_back("known_feature_alignment",
                        [](const DualBranchModel& m, const Point& pt) {
                            Tensor z = encode(m.branch_a, pt.batch.known_x);
                            return l_f(z, pt.batch.known_y, m.branch_a.prototypes);
                        });
    checks.emplace_back("background_center_alignment",
                        [](const DualBranchModel& m, const Point& pt) {
                            Tensor zb = encode(m.branch_a, pt.batch.background_x);
                            return l_fb(zb, center_prototype(m.branch_a));
                        });
    checks.emplace_back("activation_enhancement_composite",
                        [w](const DualBranchModel& m, const Point& pt) {
                            return l_faem(m.branch_a, pt.batch, w);
                        });
    checks.emplace_back("prototype_orthogonality",
                        [](const DualBranchModel& m, const Point&) {
                            return l_orth(m.branch_a.prototypes, m.branch_b.prototypes);
                        });
    checks.emplace_back("background_similarity_penalty",
                        [](const DualBranchModel& m, const Point& pt) {
                            Tensor za = encode(m.branch_a, pt.batch.background_x);
                            Tensor zb = encode(m.branch_b, pt.batch.background_x);
                            return l_pb(pt.penalty, za, zb, m.branch_a.prototypes,
                                        m.branch_b.prototypes);
                        });
    checks.emplace_back("orthogonal_composite",
                        [w](const DualBranchModel& m, const Point& pt) {
                            Tensor za = encode(m.branch_a, pt.batch.background_x);
                            Tensor zb = encode(m.branch_b, pt.batch.background_x);
                            Tensor orth =
                                l_orth(m.branch_a.prototypes, m.branch_b.prototypes);
                            Tensor pb = l_pb(pt.penalty, za, zb, m.branch_a.prototypes,
                                             m.branch_b.prototypes);
                            return add(mul_scalar(orth, w.alpha),
                                       mul_scalar(pb, w.beta));
                        });

    std::vector<Point> pts;
    pts.reserve(points);
    for (std::size_t i = 0; i < points; ++i)
        pts.push_back(draw_point(derive_seed(seed, 1000 + i)));

    std::vector<GradCheckResult> results;
    for (auto& [name, fn] : checks) {
        GradCheckResult r;
        r.name = name;
        r.points = points;
        auto t0 = std::chrono::steady_clock::now();
        for (const Point& pt : pts) r.max_rel_err = std::max(r.max_rel_err, check_loss_at(fn, pt));
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace osr
