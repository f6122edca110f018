#include "osr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "osr/errors.hpp"
#include "osr/rng.hpp"

namespace osr {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

double parse_double(const std::string& cell, const std::string& path, std::size_t line) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw DataError(path + ":" + std::to_string(line) + ": not a number: '" + cell + "'");
    if (!std::isfinite(v))
        throw DataError(path + ":" + std::to_string(line) + ": non-finite value '" + cell + "'");
    return v;
}

int parse_int(const std::string& cell, const std::string& path, std::size_t line) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0')
        throw DataError(path + ":" + std::to_string(line) + ": not an integer: '" + cell + "'");
    return static_cast<int>(v);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

void check_header(const std::vector<std::string>& cells, const std::vector<std::string>& fixed,
                  const std::string& series_prefix, const std::string& path) {
    for (std::size_t i = 0; i < fixed.size(); ++i)
        if (i >= cells.size() || cells[i] != fixed[i])
            throw DataError(path + ":1: expected header column '" + fixed[i] + "' at position " +
                            std::to_string(i + 1));
    if (cells.size() <= fixed.size())
        throw DataError(path + ":1: header needs at least one '" + series_prefix + "' column");
    for (std::size_t i = fixed.size(); i < cells.size(); ++i) {
        std::string want = series_prefix + std::to_string(i - fixed.size() + 1);
        if (cells[i] != want)
            throw DataError(path + ":1: expected header column '" + want + "', got '" +
                            cells[i] + "'");
    }
}

std::vector<int> sorted_class_ids(const LabeledDataset& ds) {
    std::set<int> ids(ds.labels.begin(), ds.labels.end());
    return {ids.begin(), ids.end()};
}

// Draws one unit-norm direction.
std::vector<double> unit_vector(std::size_t dim, Rng& rng) {
    std::vector<double> v(dim);
    double norm2 = 0;
    for (auto& x : v) {
        x = rng.gauss();
        norm2 += x * x;
    }
    double norm = std::sqrt(norm2);
    for (auto& x : v) x /= norm;
    return v;
}

} // namespace

std::size_t LabeledDataset::n_classes() const {
    return std::set<int>(labels.begin(), labels.end()).size();
}

void LabeledDataset::validate() const {
    if (n() == 0) throw DataError("dataset is empty");
    if (labels.size() != n())
        throw DataError("dataset has " + std::to_string(n()) + " rows but " +
                        std::to_string(labels.size()) + " labels");
    for (int l : labels)
        if (l < 0) throw DataError("negative class label " + std::to_string(l));
    if (!group_ids.empty() && group_ids.size() != n())
        throw DataError("group ids must cover every sample or none");
}

int OpenSetSplit::remap_label(int class_id) const {
    auto it = std::lower_bound(known_class_ids.begin(), known_class_ids.end(), class_id);
    if (it == known_class_ids.end() || *it != class_id)
        throw DataError("class " + std::to_string(class_id) + " is not a known class");
    return static_cast<int>(it - known_class_ids.begin());
}

void SyntheticConfig::validate() const {
    if (n_total_classes < 4)
        throw ConfigError("need at least 4 classes (known + background + unknown)");
    if (n_known_style < 2) throw ConfigError("need at least 2 known-style classes");
    if (n_known_style > n_total_classes)
        throw ConfigError("n_known_style exceeds the class count");
    if (raw_dim == 0) throw ConfigError("raw_dim must be positive");
    if (samples_per_class == 0) throw ConfigError("samples_per_class must be positive");
    if (cluster_spread < 0) throw ConfigError("cluster_spread must be non-negative");
    if (pseudo_similarity_mix < 0 || pseudo_similarity_mix > 1)
        throw ConfigError("pseudo_similarity_mix must lie in [0, 1]");
}

std::vector<std::vector<double>> synthetic_class_means(const SyntheticConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, 0));
    std::vector<std::vector<double>> means;
    means.reserve(config.n_total_classes);
    for (std::size_t c = 0; c < config.n_known_style; ++c)
        means.push_back(unit_vector(config.raw_dim, rng));
    for (std::size_t c = config.n_known_style; c < config.n_total_classes; ++c) {
        std::size_t i = rng.bounded(config.n_known_style);
        std::size_t j = rng.bounded(config.n_known_style - 1);
        if (j >= i) ++j; // distinct pair
        double t = rng.uniform();
        std::vector<double> novel = unit_vector(config.raw_dim, rng);
        std::vector<double> m(config.raw_dim);
        double mix = config.pseudo_similarity_mix;
        for (std::size_t d = 0; d < config.raw_dim; ++d) {
            double blend = t * means[i][d] + (1 - t) * means[j][d];
            m[d] = mix * blend + (1 - mix) * novel[d];
        }
        means.push_back(std::move(m));
    }
    return means;
}

LabeledDataset generate_synthetic(const SyntheticConfig& config) {
    auto means = synthetic_class_means(config);
    Rng rng(derive_seed(config.seed, 1));

    LabeledDataset ds;
    std::size_t n = config.n_total_classes * config.samples_per_class;
    std::vector<double> rows;
    rows.reserve(n * config.raw_dim);
    for (std::size_t c = 0; c < config.n_total_classes; ++c) {
        for (std::size_t s = 0; s < config.samples_per_class; ++s) {
            for (std::size_t d = 0; d < config.raw_dim; ++d)
                rows.push_back(means[c][d] + config.cluster_spread * rng.gauss());
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    ds.samples = Tensor::from_data({n, config.raw_dim}, std::move(rows));

    nlohmann::json prov{{"type", "synthetic"},
                        {"n_total_classes", config.n_total_classes},
                        {"n_known_style", config.n_known_style},
                        {"raw_dim", config.raw_dim},
                        {"samples_per_class", config.samples_per_class},
                        {"cluster_spread", config.cluster_spread},
                        {"pseudo_similarity_mix", config.pseudo_similarity_mix},
                        {"seed", config.seed}};
    ds.provenance = prov.dump();
    return ds;
}

std::vector<std::vector<double>> sliding_window(const SignalRecording& rec, std::size_t win,
                                                std::size_t stride) {
    if (win == 0 || stride == 0) throw ConfigError("window and stride must be positive");
    if (win > rec.length)
        throw DataError("window " + std::to_string(win) + " exceeds recording length " +
                        std::to_string(rec.length));
    std::size_t count = (rec.length - win) / stride + 1;
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        std::size_t off = w * stride;
        std::vector<double> flat;
        flat.reserve(rec.channels * win);
        for (std::size_t c = 0; c < rec.channels; ++c)
            for (std::size_t t = off; t < off + win; ++t) flat.push_back(rec.at(c, t));
        out.push_back(std::move(flat));
    }
    return out;
}

LabeledDataset window_recordings(const std::vector<SignalRecording>& recs, std::size_t win,
                                 std::size_t stride) {
    if (recs.empty()) throw DataError("no recordings to window");
    std::size_t channels = recs[0].channels;
    LabeledDataset ds;
    std::vector<double> rows;
    for (const auto& rec : recs) {
        if (rec.channels != channels)
            throw DataError("recordings disagree on channel count (" +
                            std::to_string(channels) + " vs " +
                            std::to_string(rec.channels) + ")");
        if (rec.label < 0) throw DataError("recording has no label");
        for (auto& w : sliding_window(rec, win, stride)) {
            rows.insert(rows.end(), w.begin(), w.end());
            ds.labels.push_back(rec.label);
            ds.group_ids.push_back(rec.trial);
        }
    }
    if (ds.labels.empty()) throw DataError("windowing produced no samples");
    ds.samples = Tensor::from_data({ds.labels.size(), channels * win}, std::move(rows));
    nlohmann::json prov{{"type", "windowed"}, {"win", win}, {"stride", stride}};
    ds.provenance = prov.dump();
    return ds;
}

std::vector<SignalRecording> ingest_signal_csv(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw DataError(path + ":1: missing header");
    auto header = split_csv_line(lines[0]);
    check_header(header, {"subject", "trial", "label", "t"}, "ch", path);
    std::size_t channels = header.size() - 4;

    struct Row {
        double t;
        std::vector<double> ch;
    };
    // key preserves first-appearance order
    std::vector<std::tuple<int, int, int>> order;
    std::map<std::tuple<int, int, int>, std::vector<Row>> groups;

    for (std::size_t ln = 2; ln <= lines.size(); ++ln) {
        const std::string& line = lines[ln - 1];
        if (blank(line)) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ":" + std::to_string(ln) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        int subject = parse_int(cells[0], path, ln);
        int trial = parse_int(cells[1], path, ln);
        int label = parse_int(cells[2], path, ln);
        if (label < 0)
            throw DataError(path + ":" + std::to_string(ln) + ": negative label");
        Row row;
        row.t = parse_double(cells[3], path, ln);
        for (std::size_t c = 0; c < channels; ++c)
            row.ch.push_back(parse_double(cells[4 + c], path, ln));
        auto key = std::make_tuple(subject, trial, label);
        if (groups.find(key) == groups.end()) order.push_back(key);
        groups[key].push_back(std::move(row));
    }

    std::vector<SignalRecording> recs;
    for (const auto& key : order) {
        auto& rows = groups[key];
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.t < b.t; });
        SignalRecording rec;
        rec.subject = std::get<0>(key);
        rec.trial = std::get<1>(key);
        rec.label = std::get<2>(key);
        rec.channels = channels;
        rec.length = rows.size();
        rec.values.resize(channels * rows.size());
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t t = 0; t < rows.size(); ++t)
                rec.values[c * rows.size() + t] = rows[t].ch[c];
        recs.push_back(std::move(rec));
    }
    return recs;
}

LabeledDataset ingest_vector_csv(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw DataError(path + ":1: missing header");
    auto header = split_csv_line(lines[0]);
    check_header(header, {"label"}, "f", path);
    std::size_t dim = header.size() - 1;

    LabeledDataset ds;
    std::vector<double> rows;
    for (std::size_t ln = 2; ln <= lines.size(); ++ln) {
        const std::string& line = lines[ln - 1];
        if (blank(line)) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ":" + std::to_string(ln) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        int label = parse_int(cells[0], path, ln);
        if (label < 0) throw DataError(path + ":" + std::to_string(ln) + ": negative label");
        ds.labels.push_back(label);
        for (std::size_t d = 0; d < dim; ++d)
            rows.push_back(parse_double(cells[1 + d], path, ln));
    }
    ds.samples = Tensor::from_data({ds.labels.size(), dim}, std::move(rows));
    nlohmann::json prov{{"type", "csv"}, {"path", path}};
    ds.provenance = prov.dump();
    return ds;
}

void save_dataset_csv(const LabeledDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << "label";
    for (std::size_t d = 1; d <= ds.dim(); ++d) out << ",f" << d;
    out << "\n";
    for (std::size_t i = 0; i < ds.n(); ++i) {
        out << ds.labels[i];
        for (std::size_t d = 0; d < ds.dim(); ++d)
            out << ',' << fmt_double(ds.samples.at(i, d));
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

OpenSetSplit make_split(const LabeledDataset& ds, std::size_t n_known, double test_fraction,
                        std::uint64_t seed, const SplitOptions& opt) {
    ds.validate();
    if (n_known < 2) throw ConfigError("need at least 2 known classes");
    if (!(test_fraction > 0 && test_fraction < 1))
        throw ConfigError("test_fraction must lie in (0, 1)");

    auto ids = sorted_class_ids(ds);
    if (ids.size() < n_known + 2)
        throw DataError("need at least " + std::to_string(n_known + 2) + " classes, have " +
                        std::to_string(ids.size()));

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.n(); ++i) by_class[ds.labels[i]].push_back(i);
    for (const auto& [cid, idxs] : by_class)
        if (idxs.size() < 2)
            throw DataError("class " + std::to_string(cid) + " has fewer than 2 samples");
    if (opt.per_group && ds.group_ids.empty())
        throw ConfigError("per-group split requires group ids");

    Rng rng(seed);
    auto shuffled = ids;
    rng.shuffle(shuffled);

    OpenSetSplit split;
    split.seed = seed;
    split.background_in_test = opt.background_in_test;
    split.known_class_ids.assign(shuffled.begin(), shuffled.begin() + n_known);
    std::sort(split.known_class_ids.begin(), split.known_class_ids.end());
    split.background_class_id = shuffled[n_known];
    split.unknown_class_ids.assign(shuffled.begin() + n_known + 1, shuffled.end());
    std::sort(split.unknown_class_ids.begin(), split.unknown_class_ids.end());

    auto split_indices = [&](const std::vector<std::size_t>& idxs,
                             std::vector<std::size_t>& test_out,
                             std::vector<std::size_t>& train_out) {
        std::size_t n_c = idxs.size();
        auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n_c)));
        target = std::clamp<std::size_t>(target, 1, n_c - 1);
        if (!opt.per_group) {
            auto pool = idxs;
            rng.shuffle(pool);
            test_out.insert(test_out.end(), pool.begin(), pool.begin() + target);
            train_out.insert(train_out.end(), pool.begin() + target, pool.end());
            return;
        }
        std::map<int, std::vector<std::size_t>> by_group;
        for (std::size_t i : idxs) by_group[ds.group_ids[i]].push_back(i);
        if (by_group.size() < 2)
            throw DataError("per-group split needs at least 2 groups per class");
        std::vector<int> gids;
        for (const auto& [g, v] : by_group) gids.push_back(g);
        rng.shuffle(gids);
        std::size_t taken_samples = 0, taken_groups = 0;
        for (int g : gids) {
            bool want_more = taken_samples < target && taken_groups + 1 < by_group.size();
            auto& dst = (taken_groups == 0 || want_more) ? test_out : train_out;
            if (&dst == &test_out) {
                taken_samples += by_group[g].size();
                ++taken_groups;
            }
            dst.insert(dst.end(), by_group[g].begin(), by_group[g].end());
        }
    };

    for (int cid : split.known_class_ids)
        split_indices(by_class[cid], split.test_known, split.train_known);

    const auto& bg = by_class[split.background_class_id];
    if (opt.background_in_test) {
        auto pool = bg;
        rng.shuffle(pool);
        auto target = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(pool.size())));
        target = std::clamp<std::size_t>(target, 1, pool.size() - 1);
        split.test_unknown.insert(split.test_unknown.end(), pool.begin(), pool.begin() + target);
        split.train_background.insert(split.train_background.end(), pool.begin() + target,
                                      pool.end());
    } else {
        split.train_background = bg;
    }

    for (int cid : split.unknown_class_ids) {
        const auto& idxs = by_class[cid];
        split.test_unknown.insert(split.test_unknown.end(), idxs.begin(), idxs.end());
    }

    std::sort(split.train_known.begin(), split.train_known.end());
    std::sort(split.test_known.begin(), split.test_known.end());
    std::sort(split.train_background.begin(), split.train_background.end());
    std::sort(split.test_unknown.begin(), split.test_unknown.end());
    return split;
}

void save_split_json(const OpenSetSplit& split, const std::string& path) {
    nlohmann::json j{{"known_class_ids", split.known_class_ids},
                     {"background_class_id", split.background_class_id},
                     {"unknown_class_ids", split.unknown_class_ids},
                     {"train_known", split.train_known},
                     {"test_known", split.test_known},
                     {"train_background", split.train_background},
                     {"test_unknown", split.test_unknown},
                     {"seed", split.seed},
                     {"background_in_test", split.background_in_test}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

OpenSetSplit load_split_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad split file: " + e.what());
    }
    OpenSetSplit s;
    try {
        s.known_class_ids = j.at("known_class_ids").get<std::vector<int>>();
        s.background_class_id = j.at("background_class_id").get<int>();
        s.unknown_class_ids = j.at("unknown_class_ids").get<std::vector<int>>();
        s.train_known = j.at("train_known").get<std::vector<std::size_t>>();
        s.test_known = j.at("test_known").get<std::vector<std::size_t>>();
        s.train_background = j.at("train_background").get<std::vector<std::size_t>>();
        s.test_unknown = j.at("test_unknown").get<std::vector<std::size_t>>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.background_in_test = j.value("background_in_test", false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad split file: " + e.what());
    }
    return s;
}

} // namespace osr
