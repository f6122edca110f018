#include <doctest.h>

#include <cmath>

#include "osr/losses.hpp"
#include "osr/rng.hpp"

using namespace osr;

namespace {

DualBranchModel tiny_model(std::size_t n_classes = 3, std::uint64_t seed = 17) {
    EncoderConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden_dims = {5};
    cfg.feature_dim = 3;
    cfg.activation = Activation::kTanh;
    return init_model(cfg, n_classes, seed);
}

Batch tiny_batch(std::size_t m, std::size_t m_b, std::size_t n_classes, std::uint64_t seed) {
    Rng rng(seed);
    Batch b;
    std::vector<double> kx(m * 4), bx(m_b * 4);
    for (auto& v : kx) v = rng.gauss();
    for (auto& v : bx) v = rng.gauss();
    b.known_x = Tensor::from_data({m, 4}, std::move(kx));
    for (std::size_t i = 0; i < m; ++i)
        b.known_y.push_back(static_cast<int>(rng.bounded(n_classes)));
    if (m_b > 0) b.background_x = Tensor::from_data({m_b, 4}, std::move(bx));
    return b;
}

} // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("dce on symmetric logits is log of class count") {
    Tensor logits = Tensor::full({4, 10}, 0.7);
    Tensor loss = dce_loss(logits, {0, 3, 9, 5});
    CHECK(std::abs(loss.value() - std::log(10.0)) < 1e-12);
}

TEST_CASE("dce vanishes as the true-class margin grows") {
    double prev = 1e300;
    for (double margin : {1.0, 5.0, 20.0, 80.0}) {
        Tensor logits = Tensor::from_data({1, 3}, {margin, 0, 0});
        double v = dce_loss(logits, {0}).value();
        CHECK(v < prev);
        prev = v;
    }
    CHECK(prev < 1e-30);
}

TEST_CASE("dce hand case") {
    Tensor logits = Tensor::from_data({1, 2}, {1, 0});
    double want = std::log1p(std::exp(-1.0));
    CHECK(dce_loss(logits, {0}).value() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("dce rejects bad labels and is never negative") {
    Tensor logits = Tensor::from_data({1, 2}, {1, 0});
    CHECK_THROWS_AS(dce_loss(logits, {2}), DataError);
    CHECK_THROWS_AS(dce_loss(logits, {-1}), DataError);
    CHECK_THROWS_AS(dce_loss(logits, {0, 1}), DataError);

    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> v(6);
        for (auto& x : v) x = rng.uniform(-50, 50);
        Tensor l = Tensor::from_data({2, 3}, std::move(v));
        CHECK(dce_loss(l, {1, 2}).value() >= 0.0);
    }
}

TEST_CASE("smooth norm piecewise values") {
    CHECK(smooth_norm_loss(Tensor::zeros({3})).value() == 0.0);
    CHECK(smooth_norm_loss(Tensor::from_data({1}, {2})).value() == doctest::Approx(1.5));
    CHECK(smooth_norm_loss(Tensor::from_data({2}, {0.3, -0.4})).value() ==
          doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("smooth norm switches on strict l1 < 1") {
    // at the boundary the large-norm branch applies: 1 - 0.5, not 0.5*l2
    Tensor u = Tensor::from_data({2}, {0.5, 0.5});
    CHECK(smooth_norm_loss(u).value() == doctest::Approx(0.5).epsilon(1e-15));
    Tensor just_under = Tensor::from_data({2}, {0.4999, 0.5});
    double l2 = std::sqrt(0.4999 * 0.4999 + 0.25);
    CHECK(smooth_norm_loss(just_under).value() == doctest::Approx(0.5 * l2).epsilon(1e-12));
}

TEST_CASE("feature alignment loss") {
    Tensor p = Tensor::from_data({2, 2}, {1, 2, -3, 0});

    SUBCASE("zero when every feature sits on its prototype") {
        Tensor z = Tensor::from_data({3, 2}, {1, 2, -3, 0, 1, 2});
        CHECK(l_f(z, {0, 1, 0}, p).value() == 0.0);
    }
    SUBCASE("single sample matches the scalar case") {
        Tensor z = Tensor::from_data({1, 2}, {3, 2}); // u = [2, 0]
        CHECK(l_f(z, {0}, p).value() == doctest::Approx(1.5).epsilon(1e-12));
    }
    SUBCASE("duplicating the batch leaves the mean unchanged") {
        Tensor z = Tensor::from_data({2, 2}, {0.5, 1.9, -2.8, 0.1});
        double base = l_f(z, {0, 1}, p).value();
        Tensor z2 = Tensor::from_data({4, 2}, {0.5, 1.9, -2.8, 0.1, 0.5, 1.9, -2.8, 0.1});
        CHECK(l_f(z2, {0, 1, 0, 1}, p).value() == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("label range enforced") {
        Tensor z = Tensor::from_data({1, 2}, {0, 0});
        CHECK_THROWS_AS(l_f(z, {5}, p), DataError);
    }
}

TEST_CASE("background alignment loss") {
    Tensor p_c = Tensor::from_data({2}, {1, 1});

    Tensor on_center = Tensor::from_data({2, 2}, {1, 1, 1, 1});
    CHECK(l_fb(on_center, p_c).value() == 0.0);

    CHECK(l_fb(Tensor(), p_c).value() == 0.0);
    CHECK(l_fb(Tensor::zeros({0, 2}), p_c).value() == 0.0);

    Tensor one = Tensor::from_data({1, 2}, {1.3, 0.6}); // u = [0.3, -0.4]
    CHECK(l_fb(one, p_c).value() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("single-branch composite reduces to its parts") {
    DualBranchModel m = tiny_model();
    Batch b = tiny_batch(6, 3, 3, 99);

    LossWeights off;
    off.lambda = 0;
    off.gamma = 0;
    Tensor z = encode(m.branch_a, b.known_x);
    double dce_only = dce_loss(similarity_matrix(m.branch_a, z), b.known_y).value();
    CHECK(l_faem(m.branch_a, b, off).value() == doctest::Approx(dce_only).epsilon(1e-12));

    LossWeights lf_only;
    lf_only.lambda = 1;
    lf_only.gamma = 0;
    double with_f = dce_only + l_f(z, b.known_y, m.branch_a.prototypes).value();
    CHECK(l_faem(m.branch_a, b, lf_only).value() == doctest::Approx(with_f).epsilon(1e-12));

    LossWeights both; // lambda = gamma = 1
    Tensor z_b = encode(m.branch_a, b.background_x);
    double with_fb = with_f + l_fb(z_b, center_prototype(m.branch_a)).value();
    CHECK(l_faem(m.branch_a, b, both).value() == doctest::Approx(with_fb).epsilon(1e-12));
}

TEST_CASE("orthogonality loss") {
    Tensor eye_a = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor eye_b = Tensor::from_data({2, 2}, {0, 1, 1, 0}); // rows orthogonal to eye_a rows
    CHECK(l_orth(eye_a, eye_b).value() == 0.0);

    CHECK(l_orth(eye_a, eye_a).value() == doctest::Approx(1.0));

    Tensor pa = Tensor::from_data({1, 2}, {1, 2});
    Tensor pb = Tensor::from_data({1, 2}, {2, 1});
    CHECK(l_orth(pa, pb).value() == doctest::Approx(16.0));

    CHECK_THROWS_AS(l_orth(eye_a, pa), DimError);
}

TEST_CASE("orthogonality loss is invariant under shared row permutation") {
    Rng rng(21);
    std::vector<double> a(4 * 3), b(4 * 3);
    for (auto& v : a) v = rng.gauss();
    for (auto& v : b) v = rng.gauss();
    Tensor pa = Tensor::from_data({4, 3}, a);
    Tensor pb = Tensor::from_data({4, 3}, b);
    double base = l_orth(pa, pb).value();

    std::vector<std::size_t> perm{2, 0, 3, 1};
    std::vector<double> ap(12), bp(12);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            ap[r * 3 + c] = a[perm[r] * 3 + c];
            bp[r * 3 + c] = b[perm[r] * 3 + c];
        }
    double permuted = l_orth(Tensor::from_data({4, 3}, ap), Tensor::from_data({4, 3}, bp)).value();
    CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("penalty selection") {
    SUBCASE("disagreeing argmax excludes the sample") {
        Tensor sa = Tensor::from_data({2, 2}, {5, 1, 0, 3});
        Tensor sb = Tensor::from_data({2, 2}, {1, 5, 3, 0});
        CHECK(penalty_set(sa, sb).empty());
    }
    SUBCASE("shared argmax picks the stronger branch") {
        Tensor sa = Tensor::from_data({1, 2}, {5, 1});
        Tensor sb = Tensor::from_data({1, 2}, {4, 0});
        auto sel = penalty_set(sa, sb);
        REQUIRE(sel.size() == 1);
        CHECK(sel[0].sample == 0);
        CHECK(sel[0].branch == 'A');
        CHECK(sel[0].cls == 0);

        Tensor sb2 = Tensor::from_data({1, 2}, {6, 0});
        CHECK(penalty_set(sa, sb2)[0].branch == 'B');
    }
    SUBCASE("exact tie goes to branch A") {
        Tensor s = Tensor::from_data({1, 2}, {3, 1});
        auto sel = penalty_set(s, s);
        REQUIRE(sel.size() == 1);
        CHECK(sel[0].branch == 'A');
    }
}

TEST_CASE("background penalty term") {
    Tensor z_a = Tensor::param({1, 2}, {1, 1});
    Tensor z_b = Tensor::param({1, 2}, {9, 9});
    Tensor p_a = Tensor::param({1, 2}, {2, 0});
    Tensor p_b = Tensor::param({1, 2}, {7, 7});

    CHECK(l_pb({}, z_a, z_b, p_a, p_b).value() == 0.0);

    std::vector<PenaltyEntry> sel{{0, 'A', 0}};
    Tensor pb = l_pb(sel, z_a, z_b, p_a, p_b);
    CHECK(pb.value() == doctest::Approx(2.0));

    pb.backward();
    CHECK(z_a.has_grad());
    CHECK(p_a.has_grad());
    CHECK_FALSE(z_b.has_grad()); // unchosen branch stays out of the graph
    CHECK_FALSE(p_b.has_grad());
}

TEST_CASE("total loss bookkeeping") {
    DualBranchModel m = tiny_model(3, 31);
    Batch b = tiny_batch(8, 4, 3, 77);
    LossWeights w; // defaults 1, 1, 0.1, 0.01

    auto [total, rep] = total_loss(m, b, w);
    double recomputed = rep.l_eps_a + rep.l_eps_b + w.lambda * (rep.l_f_a + rep.l_f_b) +
                        w.gamma * (rep.l_fb_a + rep.l_fb_b) + w.alpha * rep.l_orth +
                        w.beta * rep.l_pb;
    CHECK(std::abs(rep.total - recomputed) < 1e-10);
    CHECK(rep.total == total.value());

    CHECK(rep.l_eps_a >= 0);
    CHECK(rep.l_eps_b >= 0);
    CHECK(rep.l_f_a >= 0);
    CHECK(rep.l_f_b >= 0);
    CHECK(rep.l_fb_a >= 0);
    CHECK(rep.l_fb_b >= 0);
    CHECK(rep.l_orth >= 0);
    CHECK(rep.m_pb <= b.m_b());
}

TEST_CASE("total loss with cross-branch terms off is the sum of both composites") {
    DualBranchModel m = tiny_model(3, 5);
    Batch b = tiny_batch(5, 2, 3, 13);
    LossWeights w;
    w.alpha = 0;
    w.beta = 0;
    TotalLossOptions opt;
    opt.use_l_orth = false;
    opt.use_l_pb = false;
    auto [total, rep] = total_loss(m, b, w, opt);
    double want = l_faem(m.branch_a, b, w).value() + l_faem(m.branch_b, b, w).value();
    CHECK(total.value() == doctest::Approx(want).epsilon(1e-12));
    CHECK(rep.l_orth == 0.0);
    CHECK(rep.l_pb == 0.0);
    CHECK(rep.m_pb == 0);
}

TEST_CASE("single-branch mode ignores branch B entirely") {
    DualBranchModel m = tiny_model(3, 8);
    Batch b = tiny_batch(5, 2, 3, 14);
    LossWeights w;
    TotalLossOptions opt;
    opt.single_branch = true;
    auto [total, rep] = total_loss(m, b, w, opt);
    CHECK(total.value() == doctest::Approx(l_faem(m.branch_a, b, w).value()).epsilon(1e-12));
    CHECK(rep.l_eps_b == 0.0);
    CHECK(rep.l_orth == 0.0);
    CHECK(rep.l_pb == 0.0);

    total.backward();
    for (const Tensor& t : m.branch_b.parameters()) CHECK_FALSE(t.has_grad());
    for (const Tensor& t : m.branch_a.parameters()) CHECK(t.has_grad());
}

TEST_CASE("empty background disables its terms") {
    DualBranchModel m = tiny_model(3, 9);
    Batch b = tiny_batch(5, 0, 3, 15);
    auto [total, rep] = total_loss(m, b, LossWeights{});
    CHECK(rep.l_fb_a == 0.0);
    CHECK(rep.l_fb_b == 0.0);
    CHECK(rep.l_pb == 0.0);
    CHECK(rep.m_pb == 0);
    CHECK(std::isfinite(total.value()));
}

TEST_CASE("frozen penalty selection is honored") {
    DualBranchModel m = tiny_model(3, 10);
    Batch b = tiny_batch(5, 3, 3, 16);
    std::vector<PenaltyEntry> frozen{{0, 'A', 1}, {2, 'B', 0}};
    TotalLossOptions opt;
    opt.frozen_penalty = &frozen;
    auto [total, rep] = total_loss(m, b, LossWeights{}, opt);
    CHECK(rep.m_pb == 2);

    Tensor za = encode(m.branch_a, b.background_x);
    Tensor zb = encode(m.branch_b, b.background_x);
    double want = l_pb(frozen, za, zb, m.branch_a.prototypes, m.branch_b.prototypes).value();
    CHECK(rep.l_pb == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("loss gradients agree with finite differences at safe points") {
    // spot checks here; the full sweep lives in the gradient-check suite
    Rng rng(404);

    std::vector<double> lv(2 * 3);
    for (auto& v : lv) v = rng.uniform(-2, 2);
    double e1 = grad_check(
        [](const Tensor& t) { return dce_loss(t, {0, 2}); },
        Tensor::from_data({2, 3}, lv), 1e-5);
    CHECK(e1 < 1e-6);

    double e2 = grad_check(
        [](const Tensor& t) { return smooth_norm_loss(t); },
        Tensor::from_data({3}, {0.4, 0.9, -1.2}), 1e-5); // l1 = 2.5, clear of 1
    CHECK(e2 < 1e-6);

    double e3 = grad_check(
        [](const Tensor& t) { return smooth_norm_loss(t); },
        Tensor::from_data({3}, {0.1, 0.2, -0.15}), 1e-5); // l1 = 0.45, clear of 1
    CHECK(e3 < 1e-6);

    std::vector<double> pav(2 * 3), pbv(2 * 3);
    for (auto& v : pav) v = rng.gauss();
    for (auto& v : pbv) v = rng.gauss();
    Tensor pb_fixed = Tensor::from_data({2, 3}, pbv);
    double e4 = grad_check(
        [&](const Tensor& t) { return l_orth(t, pb_fixed); },
        Tensor::from_data({2, 3}, pav), 1e-5);
    CHECK(e4 < 1e-6);
}

TEST_SUITE_END();
