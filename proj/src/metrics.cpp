#include "osr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "osr/errors.hpp"

namespace osr {

namespace {

void split_counts(const std::vector<EvalRecord>& records, std::size_t& n_known,
                  std::size_t& n_unknown) {
    n_known = n_unknown = 0;
    for (const auto& r : records) (r.is_known ? n_known : n_unknown) += 1;
    if (n_known == 0) throw DataError("metric needs at least one known record");
    if (n_unknown == 0) throw DataError("metric needs at least one unknown record");
}

} // namespace

double auroc(const std::vector<EvalRecord>& records) {
    std::size_t n_known, n_unknown;
    split_counts(records, n_known, n_unknown);

    // ranks with ties averaged; AUC from the Mann-Whitney U statistic
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].score < records[b].score;
    });

    double known_rank_sum = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && records[order[j]].score == records[order[i]].score) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (records[order[k]].is_known) known_rank_sum += avg_rank;
        i = j;
    }
    double nk = static_cast<double>(n_known), nu = static_cast<double>(n_unknown);
    double u = known_rank_sum - nk * (nk + 1) / 2.0;
    return u / (nk * nu);
}

std::pair<double, std::vector<CurvePoint>> oscr(const std::vector<EvalRecord>& records) {
    std::size_t n_known, n_unknown;
    split_counts(records, n_known, n_unknown);
    double nk = static_cast<double>(n_known), nu = static_cast<double>(n_unknown);

    struct Known {
        double score;
        bool correct;
    };
    std::vector<Known> known;
    std::vector<double> unknown;
    for (const auto& r : records) {
        if (r.is_known) known.push_back({r.score, r.predicted_class == r.true_class});
        else unknown.push_back(r.score);
    }
    std::sort(known.begin(), known.end(),
              [](const Known& a, const Known& b) { return a.score > b.score; });
    std::sort(unknown.begin(), unknown.end(), std::greater<>());

    std::vector<double> thresholds{std::numeric_limits<double>::infinity()};
    for (const auto& k : known) thresholds.push_back(k.score);
    thresholds.insert(thresholds.end(), unknown.begin(), unknown.end());
    thresholds.push_back(-std::numeric_limits<double>::infinity());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<CurvePoint> curve;
    curve.reserve(thresholds.size());
    std::size_t ki = 0, ui = 0, correct = 0;
    for (double t : thresholds) {
        while (ki < known.size() && known[ki].score > t) {
            correct += known[ki].correct ? 1 : 0;
            ++ki;
        }
        while (ui < unknown.size() && unknown[ui] > t) ++ui;
        curve.push_back({static_cast<double>(ui) / nu, static_cast<double>(correct) / nk});
    }

    double area = 0;
    for (std::size_t p = 1; p < curve.size(); ++p)
        area += (curve[p].fpr - curve[p - 1].fpr) * curve[p].ccr;
    return {area, curve};
}

double closed_acc(const std::vector<EvalRecord>& records) {
    std::size_t n = 0, correct = 0;
    for (const auto& r : records) {
        if (!r.is_known) continue;
        ++n;
        correct += r.predicted_class == r.true_class ? 1 : 0;
    }
    if (n == 0) throw DataError("closed-set accuracy needs at least one known record");
    return static_cast<double>(correct) / static_cast<double>(n);
}

MetricReport evaluate(const std::vector<EvalRecord>& records) {
    MetricReport rep;
    rep.auroc = auroc(records);
    auto [area, curve] = oscr(records);
    rep.oscr = area;
    rep.ccr_fpr_curve = std::move(curve);
    rep.closed_acc = closed_acc(records);
    for (const auto& r : records) (r.is_known ? rep.n_known : rep.n_unknown) += 1;
    return rep;
}

HistogramPair activation_histogram(const std::vector<double>& known,
                                   const std::vector<double>& unknown, std::size_t bins) {
    if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
    if (known.empty()) throw DataError("histogram: known population is empty");
    if (unknown.empty()) throw DataError("histogram: unknown population is empty");

    HistogramPair h;
    h.lo = std::numeric_limits<double>::infinity();
    h.hi = -std::numeric_limits<double>::infinity();
    for (double v : known) {
        h.lo = std::min(h.lo, v);
        h.hi = std::max(h.hi, v);
    }
    for (double v : unknown) {
        h.lo = std::min(h.lo, v);
        h.hi = std::max(h.hi, v);
    }
    if (h.hi == h.lo) h.hi = h.lo + 1; // all values equal: one occupied bin

    double width = (h.hi - h.lo) / static_cast<double>(bins);
    auto bin_of = [&](double v) {
        auto b = static_cast<std::size_t>((v - h.lo) / width);
        return std::min(b, bins - 1); // top edge belongs to the last bin
    };

    std::vector<double> mass_known(bins, 0), mass_unknown(bins, 0);
    for (double v : known) mass_known[bin_of(v)] += 1.0 / static_cast<double>(known.size());
    for (double v : unknown)
        mass_unknown[bin_of(v)] += 1.0 / static_cast<double>(unknown.size());

    h.known.resize(bins);
    h.unknown.resize(bins);
    h.overlap = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        h.known[b] = mass_known[b] / width;
        h.unknown[b] = mass_unknown[b] / width;
        h.overlap += std::min(mass_known[b], mass_unknown[b]);
    }
    return h;
}

ProjectionConfusion projection_confusion(const DualBranchModel& model, const Tensor& known_x,
                                         const Tensor& unknown_x) {
    ProjectionConfusion pc;
    pc.n = model.n_classes;
    pc.known.assign(pc.n * pc.n, 0);
    pc.unknown.assign(pc.n * pc.n, 0);

    auto fill = [&](const Tensor& xs, std::vector<std::size_t>& counts, double& diag) {
        if (!xs.defined() || xs.rows() == 0) {
            diag = 0;
            return;
        }
        auto scored = score_batch(model, xs, ScoreMode::kDualBranch);
        std::size_t on_diag = 0;
        for (const auto& s : scored) {
            std::vector<double> score_a(pc.n), score_b(pc.n);
            for (std::size_t k = 0; k < pc.n; ++k) {
                score_a[k] = s.sim_a[k] * s.act_a;
                score_b[k] = s.sim_b[k] * s.act_b;
            }
            std::size_t r = argmax_lowest(score_a);
            std::size_t c = argmax_lowest(score_b);
            counts[r * pc.n + c] += 1;
            on_diag += r == c ? 1 : 0;
        }
        diag = static_cast<double>(on_diag) / static_cast<double>(scored.size());
    };
    fill(known_x, pc.known, pc.known_diag);
    fill(unknown_x, pc.unknown, pc.unknown_diag);
    return pc;
}

} // namespace osr
