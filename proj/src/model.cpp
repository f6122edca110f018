#include "osr/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "osr/errors.hpp"
#include "osr/rng.hpp"

namespace osr {

namespace {

// Makes branch B's weight stream distinct from branch A's for any user seed.
constexpr std::uint64_t kBranchSeedMask = 0x9e3779b97f4a7c15ULL;

constexpr char kCheckpointMagic[8] = {'O', 'S', 'R', 'C', 'K', 'P', 'T', '1'};

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(fan_in * fan_out);
    for (auto& x : v) x = rng.uniform(-limit, limit);
    return Tensor::param({fan_in, fan_out}, std::move(v));
}

Branch init_branch(char id, const EncoderConfig& cfg, std::size_t n_classes,
                   std::uint64_t seed) {
    Rng rng(seed);
    Branch b;
    b.id = id;
    b.activation = cfg.activation;
    std::size_t prev = cfg.input_dim;
    for (std::size_t h : cfg.hidden_dims) {
        b.hidden_w.push_back(glorot_uniform(prev, h, rng));
        b.hidden_b.push_back(Tensor::param({h}, std::vector<double>(h, 0.0)));
        prev = h;
    }
    b.out_w = glorot_uniform(prev, cfg.feature_dim, rng);
    std::vector<double> p(n_classes * cfg.feature_dim);
    for (auto& x : p) x = rng.gauss();
    b.prototypes = Tensor::param({n_classes, cfg.feature_dim}, std::move(p));
    return b;
}

void write_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_f64_le(std::string& out, double d) {
    write_u64_le(out, std::bit_cast<std::uint64_t>(d));
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw DataError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

// Stable name -> tensor listing shared by save and load.
std::vector<std::pair<std::string, Tensor>> named_parameters(const DualBranchModel& m) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const Branch* br : {&m.branch_a, &m.branch_b}) {
        std::string prefix = br->id == 'A' ? "branch_a." : "branch_b.";
        for (std::size_t i = 0; i < br->hidden_w.size(); ++i) {
            out.emplace_back(prefix + "hidden_w." + std::to_string(i), br->hidden_w[i]);
            out.emplace_back(prefix + "hidden_b." + std::to_string(i), br->hidden_b[i]);
        }
        out.emplace_back(prefix + "out_w", br->out_w);
        out.emplace_back(prefix + "prototypes", br->prototypes);
    }
    return out;
}

} // namespace

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::kRelu;
    if (name == "tanh") return Activation::kTanh;
    throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string activation_name(Activation a) {
    return a == Activation::kRelu ? "relu" : "tanh";
}

void EncoderConfig::validate() const {
    if (input_dim == 0) throw ConfigError("encoder input_dim must be positive");
    if (feature_dim == 0) throw ConfigError("encoder feature_dim must be positive");
    for (std::size_t h : hidden_dims)
        if (h == 0) throw ConfigError("encoder hidden dims must be positive");
}

std::vector<Tensor> Branch::parameters() const {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < hidden_w.size(); ++i) {
        out.push_back(hidden_w[i]);
        out.push_back(hidden_b[i]);
    }
    out.push_back(out_w);
    out.push_back(prototypes);
    return out;
}

std::vector<Tensor> DualBranchModel::parameters() const {
    std::vector<Tensor> out = branch_a.parameters();
    for (const Tensor& t : branch_b.parameters()) out.push_back(t);
    return out;
}

DualBranchModel init_model(const EncoderConfig& config, std::size_t n_classes,
                           std::uint64_t seed) {
    config.validate();
    if (n_classes < 2) throw ConfigError("need at least 2 known classes");
    DualBranchModel m;
    m.config = config;
    m.n_classes = n_classes;
    m.seed = seed;
    m.branch_a = init_branch('A', config, n_classes, seed);
    m.branch_b = init_branch('B', config, n_classes, seed ^ kBranchSeedMask);

    double max_diff = 0;
    auto pa = m.branch_a.parameters(), pb = m.branch_b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t j = 0; j < pa[i].size(); ++j)
            max_diff = std::max(max_diff, std::abs(pa[i].values()[j] - pb[i].values()[j]));
    if (!(max_diff > 0)) throw ContractError("branch weights did not diverge at init");
    return m;
}

Tensor encode(const Branch& branch, const Tensor& x) {
    if (x.ndim() != 2) throw DimError("encode expects a 2-d batch, got " + shape_str(x.shape()));
    std::size_t want = branch.hidden_w.empty() ? branch.out_w.rows() : branch.hidden_w[0].rows();
    if (x.cols() != want)
        throw DimError("encode: input has " + std::to_string(x.cols()) +
                       " columns, encoder expects " + std::to_string(want));
    Tensor h = x;
    for (std::size_t i = 0; i < branch.hidden_w.size(); ++i) {
        Tensor lin = add_rowvec(matmul(h, branch.hidden_w[i]), branch.hidden_b[i]);
        h = branch.activation == Activation::kRelu ? relu(lin) : osr::tanh(lin);
    }
    return matmul(h, branch.out_w);
}

Tensor center_prototype(const Branch& branch) {
    double inv_n = 1.0 / static_cast<double>(branch.prototypes.rows());
    return mul_scalar(sum_axis0(branch.prototypes), inv_n);
}

Tensor similarity_matrix(const Branch& branch, const Tensor& z) {
    if (z.ndim() != 2 || z.cols() != branch.prototypes.cols())
        throw DimError("similarity_matrix: features " + shape_str(z.shape()) +
                       " vs prototypes " + shape_str(branch.prototypes.shape()));
    return matmul_nt(z, branch.prototypes);
}

Tensor prototype_distance(const Branch& branch, const Tensor& z) {
    return mul_scalar(similarity_matrix(branch, z), -1.0);
}

void save_checkpoint(const DualBranchModel& model, const std::string& path) {
    nlohmann::json manifest;
    manifest["config"] = {
        {"activation", activation_name(model.config.activation)},
        {"feature_dim", model.config.feature_dim},
        {"hidden_dims", model.config.hidden_dims},
        {"input_dim", model.config.input_dim},
    };
    manifest["n_classes"] = model.n_classes;
    manifest["seed"] = model.seed;

    auto named = named_parameters(model);
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : named)
        tensors.push_back({{"name", name}, {"shape", t.shape()}});
    manifest["tensors"] = tensors;

    std::string body;
    std::string mjson = manifest.dump();
    body.append(kCheckpointMagic, sizeof kCheckpointMagic);
    write_u32_le(body, 1); // format version
    write_u64_le(body, mjson.size());
    body += mjson;
    for (const auto& [name, t] : named)
        for (double d : t.values()) write_f64_le(body, d);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw DataError("write failed: " + path);
}

DualBranchModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    ByteReader r{buf};
    r.need(sizeof kCheckpointMagic);
    if (buf.compare(0, sizeof kCheckpointMagic, kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw DataError("not a model checkpoint: " + path);
    r.pos = sizeof kCheckpointMagic;
    std::uint32_t version = r.u32();
    if (version != 1)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t mlen = r.u64();
    r.need(mlen);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(buf.substr(r.pos, mlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad checkpoint manifest: ") + e.what());
    }
    r.pos += mlen;

    EncoderConfig cfg;
    cfg.input_dim = manifest.at("config").at("input_dim").get<std::size_t>();
    cfg.hidden_dims = manifest.at("config").at("hidden_dims").get<std::vector<std::size_t>>();
    cfg.feature_dim = manifest.at("config").at("feature_dim").get<std::size_t>();
    cfg.activation = activation_from_string(manifest.at("config").at("activation").get<std::string>());
    auto n_classes = manifest.at("n_classes").get<std::size_t>();
    auto seed = manifest.at("seed").get<std::uint64_t>();

    DualBranchModel m = init_model(cfg, n_classes, seed);
    auto named = named_parameters(m);
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != named.size())
        throw DataError("checkpoint lists " + std::to_string(tensors.size()) +
                        " tensors, model has " + std::to_string(named.size()));
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& entry = tensors.at(i);
        if (entry.at("name").get<std::string>() != named[i].first)
            throw DataError("checkpoint tensor order mismatch at '" +
                            entry.at("name").get<std::string>() + "'");
        if (entry.at("shape").get<Shape>() != named[i].second.shape())
            throw DataError("checkpoint shape mismatch for " + named[i].first);
        auto& vals = named[i].second.values();
        for (double& d : vals) d = r.f64();
    }
    if (r.pos != buf.size()) throw DataError("trailing bytes in checkpoint: " + path);
    return m;
}

} // namespace osr
