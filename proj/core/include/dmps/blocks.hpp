#pragma once

#include <string>
#include <vector>

#include "dmps/kernel.hpp"
#include "dmps/params.hpp"
#include "dmps/tape.hpp"
#include "dmps/tensor.hpp"

namespace dmps {

enum class BlockKind { MessagePassing, SetDenoising, SetResidual };
enum class PoolMode { Sum, Mean, Max };
enum class GammaMode { Fixed, Learnable };
enum class HeadTransform { Identity, Sigmoid, Exp };

BlockKind block_kind_from_string(const std::string& s);
std::string to_string(BlockKind k);
PoolMode pool_mode_from_string(const std::string& s);
std::string to_string(PoolMode m);
HeadTransform head_transform_from_string(const std::string& s);
std::string to_string(HeadTransform t);

struct BlockConfig {
    BlockKind kind = BlockKind::SetDenoising;
    int count = 3;
    std::vector<int> widths;  // output dim per block; empty keeps the input width
    Activation nonlinearity = Activation::Tanh;
    GammaMode gamma_mode = GammaMode::Fixed;
    double gamma_fixed = 0.5;
    bool gamma_per_block = false;  // one shared coefficient by default
};

struct EncoderConfig {
    std::vector<int> dims;  // {input, ..., output}, at least {in, out}
    Activation activation = Activation::Tanh;
};

struct HeadConfig {
    int output_dim = 1;
    HeadTransform transform = HeadTransform::Identity;
};

// Full model description. Dimension chain: encoder output feeds both the
// kernel embedding and the first block; the last block's width feeds pooling
// and the head.
struct ModelConfig {
    EncoderConfig encoder;
    KernelConfig kernel;
    BlockConfig blocks;
    PoolMode pooling = PoolMode::Sum;
    HeadConfig head;

    int input_dim() const;
    int block_width(int t) const;  // output width of block t (0-based)
    int representation_dim() const;
    void validate() const;
};

// gamma = sigmoid(g): keeps the diffusion coefficient inside (0,1).
double gamma_value(double unconstrained);
Value gamma_value(Tape& tape, Value unconstrained);

// X' = W X.
Value message_passing_step(Tape& tape, Value weights, Value x);

// Two-line update: convex mix (1-gamma) X + gamma W X, then linear layer
// and the elementwise nonlinearity.
Value set_denoising_block(Tape& tape, Value weights, Value x, Value gamma, Value h_weight,
                          Value h_bias, Activation tau);

// X' = X + tau((W X) H + b); H must be square so the addition is defined.
Value set_residual_block(Tape& tape, Value weights, Value x, Value h_weight, Value h_bias,
                         Activation tau);

// Column-wise reduction over set elements; rejects empty sets.
Value pool_set(Tape& tape, Value x, PoolMode mode);
Tensor pool_set(const Tensor& x, PoolMode mode);

ParamStore init_model_params(const ModelConfig& cfg, SplitRng& rng);

// Full pass per the model architecture: encode rows, build the latent graph
// once, run the block stack on the shared W, pool, apply the head.
Value dmps_forward(Tape& tape, const Tensor& set_elements, ParamStore& store,
                   const ModelConfig& cfg);

// Same pass with the latent graph replaced by a caller-supplied weight
// matrix (identity or uniform-graph ablations); the kernel embedding is
// skipped entirely.
Value dmps_forward_fixed_graph(Tape& tape, const Tensor& set_elements, ParamStore& store,
                               const ModelConfig& cfg, const Tensor& weights);

// Convenience: forward on a frozen snapshot, returning the plain prediction.
Tensor dmps_predict(const Tensor& set_elements, ParamStore& store, const ModelConfig& cfg);

}  // namespace dmps
