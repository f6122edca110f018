#include "osr/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "osr/errors.hpp"

namespace osr {

std::vector<double> combine_confidence(const std::vector<double>& sim_a, double act_a,
                                       const std::vector<double>& sim_b, double act_b) {
    if (!sim_b.empty() && sim_a.size() != sim_b.size())
        throw DimError("confidence: branch similarity lengths differ");
    std::vector<double> c(sim_a.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        c[k] = sim_a[k] * act_a;
        if (!sim_b.empty()) c[k] += sim_b[k] * act_b;
    }
    return c;
}

std::size_t argmax_lowest(const std::vector<double>& v) {
    if (v.empty()) throw ContractError("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::vector<ScoredSample> score_batch(const DualBranchModel& model, const Tensor& xs,
                                      ScoreMode mode) {
    if (xs.ndim() != 2)
        throw DimError("score_batch expects a 2-d batch, got " + shape_str(xs.shape()));
    std::size_t n = xs.rows(), n_cls = model.n_classes;
    Tensor z_a = encode(model.branch_a, xs);
    Tensor sim_a = similarity_matrix(model.branch_a, z_a);
    Tensor z_b, sim_b;
    bool dual = mode == ScoreMode::kDualBranch;
    if (dual) {
        z_b = encode(model.branch_b, xs);
        sim_b = similarity_matrix(model.branch_b, z_b);
    }

    auto row_l1 = [](const Tensor& z, std::size_t i) {
        double s = 0;
        for (std::size_t j = 0; j < z.cols(); ++j) s += std::abs(z.at(i, j));
        return s;
    };

    std::vector<ScoredSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        ScoredSample& s = out[i];
        s.sim_a.resize(n_cls);
        for (std::size_t k = 0; k < n_cls; ++k) s.sim_a[k] = sim_a.at(i, k);
        s.act_a = row_l1(z_a, i);
        if (dual) {
            s.sim_b.resize(n_cls);
            for (std::size_t k = 0; k < n_cls; ++k) s.sim_b[k] = sim_b.at(i, k);
            s.act_b = row_l1(z_b, i);
        }
        s.c = combine_confidence(s.sim_a, s.act_a, s.sim_b, s.act_b);
        s.k_star = argmax_lowest(s.c);
        s.c_max = s.c[s.k_star];
    }
    return out;
}

ScoredSample score_sample(const DualBranchModel& model, const Tensor& x, ScoreMode mode) {
    Tensor batch = x.ndim() == 1 ? Tensor::from_data({1, x.size()}, x.values())
                                 : x;
    auto scored = score_batch(model, batch, mode);
    if (scored.size() != 1) throw DimError("score_sample expects a single sample");
    return scored[0];
}

Decision decide(const ScoredSample& s, double threshold) {
    Decision d;
    d.threshold = threshold;
    d.accepted = s.c_max > threshold;
    d.predicted_class = d.accepted ? static_cast<int>(s.k_star) : kRejectClass;
    return d;
}

double calibrate_threshold(std::vector<double> scores_known_validation, double target) {
    if (scores_known_validation.empty())
        throw DataError("cannot calibrate a threshold from zero scores");
    if (target < 0 || target >= 1)
        throw ConfigError("calibration target must lie in [0, 1)");
    std::sort(scores_known_validation.begin(), scores_known_validation.end());
    auto idx = static_cast<std::size_t>(
        std::floor(target * static_cast<double>(scores_known_validation.size() - 1)));
    return scores_known_validation[idx];
}

BaselineKind baseline_from_string(const std::string& name) {
    if (name == "softmax_confidence") return BaselineKind::kSoftmaxConfidence;
    if (name == "pl_similarity") return BaselineKind::kPlSimilarity;
    throw ConfigError("unknown baseline '" + name +
                      "' (expected softmax_confidence or pl_similarity)");
}

std::string baseline_name(BaselineKind kind) {
    return kind == BaselineKind::kSoftmaxConfidence ? "softmax_confidence" : "pl_similarity";
}

std::vector<double> baseline_scores(BaselineKind kind, const DualBranchModel& model,
                                    const Tensor& xs) {
    Tensor z = encode(model.branch_a, xs);
    Tensor sim = similarity_matrix(model.branch_a, z);
    std::vector<double> out(xs.rows());
    if (kind == BaselineKind::kPlSimilarity) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            double best = sim.at(i, 0);
            for (std::size_t k = 1; k < sim.cols(); ++k) best = std::max(best, sim.at(i, k));
            out[i] = best;
        }
        return out;
    }
    Tensor logp = log_softmax(sim);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double best = logp.at(i, 0);
        for (std::size_t k = 1; k < logp.cols(); ++k) best = std::max(best, logp.at(i, k));
        out[i] = std::exp(best);
    }
    return out;
}

} // namespace osr
