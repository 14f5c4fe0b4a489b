#pragma once

#include <string>

#include "dmps/params.hpp"
#include "dmps/tape.hpp"
#include "dmps/tensor.hpp"

namespace dmps {

// Two-layer embedding MLP feeding an RBF kernel with adaptive bandwidth.
// The bandwidth is stored as an unconstrained scalar and mapped through
// softplus so it stays positive.
struct KernelConfig {
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    Activation f1 = Activation::Tanh;
    Activation f2 = Activation::Tanh;
    double sigma0 = 1.0;
    double delta = 0.0;  // sparsification threshold, 0 disables

    void validate() const;
};

// Kernel matrix and row-stochastic weight matrix of one input set.
struct LatentGraph {
    Tensor kernel;   // K, symmetric, diagonal 1
    Tensor weights;  // W, rows sum to 1
    int n = 0;
};

// Tracked counterpart used inside a forward pass; the same W is reused across
// all stacked blocks (the latent graph is static).
struct TrackedLatentGraph {
    Value kernel;
    Value weights;
};

// Parameter names used by the kernel embedding, relative to `prefix`:
//   <prefix>w1, <prefix>b1, <prefix>w2, <prefix>b2, <prefix>sigma_raw
void init_kernel_params(ParamStore& store, const KernelConfig& cfg, SplitRng& rng,
                        const std::string& prefix = "kernel.");

double inverse_softplus(double y);

// Row-wise shared MLP: row i of the output embeds element i.
Value embed_elements(Tape& tape, Value x, ParamStore& store, const KernelConfig& cfg,
                     const std::string& prefix = "kernel.");

// K_ij = exp(-|phi_i - phi_j|^2 / (2 sigma^2)).
Value rbf_kernel_matrix(Tape& tape, Value features, Value bandwidth);

// W = row softmax of K.
Value normalize_to_stochastic(Tape& tape, Value kernel);

// Zeroes entries below delta and renormalizes each row; a row with no
// surviving entry keeps only its self-weight.
Value threshold_sparsify(Tape& tape, Value weights, double delta);

Value kernel_bandwidth(Tape& tape, ParamStore& store, const std::string& prefix = "kernel.");

TrackedLatentGraph build_latent_graph(Tape& tape, Value x, ParamStore& store,
                                      const KernelConfig& cfg,
                                      const std::string& prefix = "kernel.");

// Untracked convenience for exports and diagnostics.
LatentGraph build_latent_graph(const Tensor& x, ParamStore& store, const KernelConfig& cfg,
                               const std::string& prefix = "kernel.");

// Untracked sparsification used on exported weight matrices.
Tensor threshold_sparsify(const Tensor& weights, double delta);

}  // namespace dmps
