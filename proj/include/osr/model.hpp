#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osr/tensor.hpp"

namespace osr {

enum class Activation { kRelu, kTanh };

Activation activation_from_string(const std::string& name);
std::string activation_name(Activation a);

struct EncoderConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{64, 64};
    std::size_t feature_dim = 32;
    Activation activation = Activation::kRelu;

    void validate() const;
};

// One encoder plus its learnable class prototypes (rows of `prototypes`).
struct Branch {
    char id = 'A';
    Activation activation = Activation::kRelu;
    std::vector<Tensor> hidden_w;
    std::vector<Tensor> hidden_b;
    Tensor out_w;      // final projection, deliberately bias-free
    Tensor prototypes; // N x d

    std::vector<Tensor> parameters() const;
    std::size_t n_classes() const { return prototypes.rows(); }
};

// Two encoders with identical shapes but independently initialized weights.
struct DualBranchModel {
    EncoderConfig config;
    std::size_t n_classes = 0;
    std::uint64_t seed = 0;
    Branch branch_a;
    Branch branch_b;

    std::vector<Tensor> parameters() const;
};

DualBranchModel init_model(const EncoderConfig& config, std::size_t n_classes,
                           std::uint64_t seed);

// Forward pass; x is [batch x input_dim], result [batch x feature_dim].
Tensor encode(const Branch& branch, const Tensor& x);

// Mean of the branch's prototypes, recomputed from their current values.
Tensor center_prototype(const Branch& branch);

// Entry (i, k) = z_i . p_k. These are the classification logits.
Tensor similarity_matrix(const Branch& branch, const Tensor& z);

// Generalized distance to each prototype; exactly -similarity_matrix.
Tensor prototype_distance(const Branch& branch, const Tensor& z);

void save_checkpoint(const DualBranchModel& model, const std::string& path);
DualBranchModel load_checkpoint(const std::string& path);

} // namespace osr
