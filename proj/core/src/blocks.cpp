#include "dmps/blocks.hpp"

#include <cmath>

#include "dmps/errors.hpp"

namespace dmps {

BlockKind block_kind_from_string(const std::string& s) {
    if (s == "mp") return BlockKind::MessagePassing;
    if (s == "denoise") return BlockKind::SetDenoising;
    if (s == "residual") return BlockKind::SetResidual;
    throw ConfigError("unknown block kind: " + s + " (expected mp|denoise|residual)");
}

std::string to_string(BlockKind k) {
    switch (k) {
        case BlockKind::MessagePassing: return "mp";
        case BlockKind::SetDenoising: return "denoise";
        case BlockKind::SetResidual: return "residual";
    }
    return "mp";
}

PoolMode pool_mode_from_string(const std::string& s) {
    if (s == "sum") return PoolMode::Sum;
    if (s == "mean") return PoolMode::Mean;
    if (s == "max") return PoolMode::Max;
    throw ConfigError("unknown pooling mode: " + s + " (expected sum|mean|max)");
}

std::string to_string(PoolMode m) {
    switch (m) {
        case PoolMode::Sum: return "sum";
        case PoolMode::Mean: return "mean";
        case PoolMode::Max: return "max";
    }
    return "sum";
}

HeadTransform head_transform_from_string(const std::string& s) {
    if (s == "identity") return HeadTransform::Identity;
    if (s == "sigmoid") return HeadTransform::Sigmoid;
    if (s == "exp") return HeadTransform::Exp;
    throw ConfigError("unknown head transform: " + s + " (expected identity|sigmoid|exp)");
}

std::string to_string(HeadTransform t) {
    switch (t) {
        case HeadTransform::Identity: return "identity";
        case HeadTransform::Sigmoid: return "sigmoid";
        case HeadTransform::Exp: return "exp";
    }
    return "identity";
}

int ModelConfig::input_dim() const {
    if (encoder.dims.size() < 2) throw ConfigError("encoder needs at least input and output dims");
    return encoder.dims.front();
}

int ModelConfig::block_width(int t) const {
    const int base = encoder.dims.back();
    if (blocks.widths.empty()) return base;
    if (static_cast<int>(blocks.widths.size()) != blocks.count)
        throw ConfigError("block widths must match the block count");
    return blocks.widths[static_cast<size_t>(t)];
}

int ModelConfig::representation_dim() const {
    return blocks.count > 0 ? block_width(blocks.count - 1) : encoder.dims.back();
}

void ModelConfig::validate() const {
    if (encoder.dims.size() < 2) throw ConfigError("encoder needs at least input and output dims");
    for (int d : encoder.dims)
        if (d < 1) throw ConfigError("encoder dimensions must be positive");
    kernel.validate();
    if (kernel.input_dim != encoder.dims.back())
        throw ConfigError("kernel embedding input dim must equal the encoder output dim");
    if (blocks.count < 1) throw ConfigError("block count must be at least 1");
    if (!blocks.widths.empty() && static_cast<int>(blocks.widths.size()) != blocks.count)
        throw ConfigError("block widths must match the block count");
    int in = encoder.dims.back();
    for (int t = 0; t < blocks.count; ++t) {
        const int out = block_width(t);
        if (out < 1) throw ConfigError("block widths must be positive");
        if (blocks.kind == BlockKind::SetResidual && out != in)
            throw ConfigError("set-residual blocks need square layers (input " +
                              std::to_string(in) + ", output " + std::to_string(out) + ")");
        in = out;
    }
    if (blocks.gamma_mode == GammaMode::Fixed &&
        !(blocks.gamma_fixed > 0.0 && blocks.gamma_fixed < 1.0))
        throw ConfigError("fixed diffusion coefficient must lie strictly inside (0, 1)");
    if (head.output_dim < 1) throw ConfigError("head output dim must be positive");
}

double gamma_value(double unconstrained) { return 1.0 / (1.0 + std::exp(-unconstrained)); }

Value gamma_value(Tape& tape, Value unconstrained) {
    return tape.elementwise(Activation::Sigmoid, unconstrained);
}

Value message_passing_step(Tape& tape, Value weights, Value x) {
    return tape.matmul(weights, x);
}

Value set_denoising_block(Tape& tape, Value weights, Value x, Value gamma, Value h_weight,
                          Value h_bias, Activation tau) {
    Value mixed = tape.convex_mix(gamma, x, message_passing_step(tape, weights, x));
    return tape.elementwise(tau, tape.add_row_bias(tape.matmul(mixed, h_weight), h_bias));
}

Value set_residual_block(Tape& tape, Value weights, Value x, Value h_weight, Value h_bias,
                         Activation tau) {
    const Tensor& h = tape.value(h_weight);
    if (h.rows() != h.cols())
        throw ConfigError("set-residual block needs a square layer, got " +
                          std::to_string(h.rows()) + "x" + std::to_string(h.cols()));
    Value passed = message_passing_step(tape, weights, x);
    Value transformed =
        tape.elementwise(tau, tape.add_row_bias(tape.matmul(passed, h_weight), h_bias));
    return tape.add(x, transformed);
}

Value pool_set(Tape& tape, Value x, PoolMode mode) {
    switch (mode) {
        case PoolMode::Sum: return tape.pool_sum(x);
        case PoolMode::Mean: return tape.pool_mean(x);
        case PoolMode::Max: return tape.pool_max(x);
    }
    return tape.pool_sum(x);
}

Tensor pool_set(const Tensor& x, PoolMode mode) {
    Tape tape;
    return tape.value(pool_set(tape, tape.input(x), mode));
}

ParamStore init_model_params(const ModelConfig& cfg, SplitRng& rng) {
    cfg.validate();
    ParamStore store;
    SplitRng enc_rng = rng.split(1);
    for (size_t l = 0; l + 1 < cfg.encoder.dims.size(); ++l) {
        const std::string tag = "encoder.w" + std::to_string(l);
        store.create_glorot(tag, cfg.encoder.dims[l], cfg.encoder.dims[l + 1], enc_rng);
        store.create("encoder.b" + std::to_string(l), 1, cfg.encoder.dims[l + 1]);
    }
    SplitRng ker_rng = rng.split(2);
    init_kernel_params(store, cfg.kernel, ker_rng);
    SplitRng blk_rng = rng.split(3);
    int in = cfg.encoder.dims.back();
    for (int t = 0; t < cfg.blocks.count; ++t) {
        const int out = cfg.block_width(t);
        store.create_glorot("block" + std::to_string(t) + ".w", in, out, blk_rng);
        store.create("block" + std::to_string(t) + ".b", 1, out);
        in = out;
    }
    if (cfg.blocks.kind == BlockKind::SetDenoising &&
        cfg.blocks.gamma_mode == GammaMode::Learnable) {
        if (cfg.blocks.gamma_per_block) {
            for (int t = 0; t < cfg.blocks.count; ++t)
                store.create_scalar("block" + std::to_string(t) + ".gamma_raw", 0.0);
        } else {
            store.create_scalar("blocks.gamma_raw", 0.0);  // sigmoid(0) = 0.5
        }
    }
    SplitRng head_rng = rng.split(4);
    store.create_glorot("head.w", cfg.representation_dim(), cfg.head.output_dim, head_rng);
    store.create("head.b", 1, cfg.head.output_dim);
    return store;
}

namespace {

Value forward_impl(Tape& tape, const Tensor& set_elements, ParamStore& store,
                   const ModelConfig& cfg, const Tensor* fixed_weights) {
    if (set_elements.rows() < 1) throw DimensionError("input set must contain at least one element");
    if (set_elements.cols() != cfg.input_dim())
        throw DimensionError("set elements have " + std::to_string(set_elements.cols()) +
                             " features, encoder expects " + std::to_string(cfg.input_dim()));

    Value h = tape.input(set_elements);
    for (size_t l = 0; l + 1 < cfg.encoder.dims.size(); ++l) {
        const std::string idx = std::to_string(l);
        h = tape.add_row_bias(tape.matmul(h, tape.param(store, "encoder.w" + idx)),
                              tape.param(store, "encoder.b" + idx));
        h = tape.elementwise(cfg.encoder.activation, h);
    }

    TrackedLatentGraph graph;
    if (fixed_weights != nullptr) {
        if (fixed_weights->rows() != set_elements.rows())
            throw DimensionError("fixed weight matrix does not match the set cardinality");
        graph.weights = tape.input(*fixed_weights);
    } else {
        graph = build_latent_graph(tape, h, store, cfg.kernel);
    }

    Value shared_gamma;
    if (cfg.blocks.kind == BlockKind::SetDenoising && !cfg.blocks.gamma_per_block) {
        shared_gamma = cfg.blocks.gamma_mode == GammaMode::Learnable
                           ? gamma_value(tape, tape.param(store, "blocks.gamma_raw"))
                           : tape.constant(cfg.blocks.gamma_fixed);
    }

    for (int t = 0; t < cfg.blocks.count; ++t) {
        const std::string idx = std::to_string(t);
        Value w = tape.param(store, "block" + idx + ".w");
        Value b = tape.param(store, "block" + idx + ".b");
        switch (cfg.blocks.kind) {
            case BlockKind::MessagePassing:
                h = tape.elementwise(
                    cfg.blocks.nonlinearity,
                    tape.add_row_bias(
                        tape.matmul(message_passing_step(tape, graph.weights, h), w), b));
                break;
            case BlockKind::SetDenoising: {
                Value gamma = shared_gamma;
                if (cfg.blocks.gamma_per_block) {
                    gamma = cfg.blocks.gamma_mode == GammaMode::Learnable
                                ? gamma_value(tape, tape.param(store, "block" + idx + ".gamma_raw"))
                                : tape.constant(cfg.blocks.gamma_fixed);
                }
                h = set_denoising_block(tape, graph.weights, h, gamma, w, b,
                                        cfg.blocks.nonlinearity);
                break;
            }
            case BlockKind::SetResidual:
                h = set_residual_block(tape, graph.weights, h, w, b, cfg.blocks.nonlinearity);
                break;
        }
    }

    Value pooled = pool_set(tape, h, cfg.pooling);
    Value out = tape.add_row_bias(tape.matmul(pooled, tape.param(store, "head.w")),
                                  tape.param(store, "head.b"));
    switch (cfg.head.transform) {
        case HeadTransform::Identity: return out;
        case HeadTransform::Sigmoid: return tape.elementwise(Activation::Sigmoid, out);
        case HeadTransform::Exp: return tape.elementwise(Activation::Exp, out);
    }
    return out;
}

}  // namespace

Value dmps_forward(Tape& tape, const Tensor& set_elements, ParamStore& store,
                   const ModelConfig& cfg) {
    return forward_impl(tape, set_elements, store, cfg, nullptr);
}

Value dmps_forward_fixed_graph(Tape& tape, const Tensor& set_elements, ParamStore& store,
                               const ModelConfig& cfg, const Tensor& weights) {
    return forward_impl(tape, set_elements, store, cfg, &weights);
}

Tensor dmps_predict(const Tensor& set_elements, ParamStore& store, const ModelConfig& cfg) {
    Tape tape;
    return tape.value(dmps_forward(tape, set_elements, store, cfg));
}

}  // namespace dmps
