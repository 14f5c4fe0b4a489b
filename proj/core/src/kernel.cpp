#include "dmps/kernel.hpp"

#include <cmath>

#include "dmps/errors.hpp"

namespace dmps {

void KernelConfig::validate() const {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
        throw ConfigError("kernel embedding dimensions must be positive");
    if (!(sigma0 > 0.0)) throw ConfigError("initial bandwidth must be positive");
    if (!(delta >= 0.0 && delta < 1.0))
        throw ConfigError("sparsification threshold must lie in [0, 1)");
}

double inverse_softplus(double y) {
    // softplus(x) = log(1 + e^x); inverse for y > 0.
    return y > 30.0 ? y : std::log(std::expm1(y));
}

void init_kernel_params(ParamStore& store, const KernelConfig& cfg, SplitRng& rng,
                        const std::string& prefix) {
    cfg.validate();
    store.create_glorot(prefix + "w1", cfg.input_dim, cfg.hidden_dim, rng);
    store.create(prefix + "b1", 1, cfg.hidden_dim);
    store.create_glorot(prefix + "w2", cfg.hidden_dim, cfg.output_dim, rng);
    store.create(prefix + "b2", 1, cfg.output_dim);
    store.create_scalar(prefix + "sigma_raw", inverse_softplus(cfg.sigma0));
}

Value embed_elements(Tape& tape, Value x, ParamStore& store, const KernelConfig& cfg,
                     const std::string& prefix) {
    if (tape.value(x).cols() != cfg.input_dim)
        throw DimensionError("embed_elements: set features have " +
                             std::to_string(tape.value(x).cols()) + " columns, expected " +
                             std::to_string(cfg.input_dim));
    Value h = tape.add_row_bias(tape.matmul(x, tape.param(store, prefix + "w1")),
                                tape.param(store, prefix + "b1"));
    h = tape.elementwise(cfg.f1, h);
    h = tape.add_row_bias(tape.matmul(h, tape.param(store, prefix + "w2")),
                          tape.param(store, prefix + "b2"));
    return tape.elementwise(cfg.f2, h);
}

Value rbf_kernel_matrix(Tape& tape, Value features, Value bandwidth) {
    return tape.rbf_kernel(features, bandwidth);
}

Value normalize_to_stochastic(Tape& tape, Value kernel) { return tape.softmax_rows(kernel); }

Value threshold_sparsify(Tape& tape, Value weights, double delta) {
    return tape.sparsify_rows(weights, delta);
}

Value kernel_bandwidth(Tape& tape, ParamStore& store, const std::string& prefix) {
    return tape.elementwise(Activation::Softplus, tape.param(store, prefix + "sigma_raw"));
}

TrackedLatentGraph build_latent_graph(Tape& tape, Value x, ParamStore& store,
                                      const KernelConfig& cfg, const std::string& prefix) {
    Value phi = embed_elements(tape, x, store, cfg, prefix);
    Value sigma = kernel_bandwidth(tape, store, prefix);
    Value k = rbf_kernel_matrix(tape, phi, sigma);
    Value w = normalize_to_stochastic(tape, k);
    if (cfg.delta > 0.0) w = threshold_sparsify(tape, w, cfg.delta);
    return {k, w};
}

LatentGraph build_latent_graph(const Tensor& x, ParamStore& store, const KernelConfig& cfg,
                               const std::string& prefix) {
    Tape tape;
    TrackedLatentGraph g = build_latent_graph(tape, tape.input(x), store, cfg, prefix);
    return {tape.value(g.kernel), tape.value(g.weights), x.rows()};
}

Tensor threshold_sparsify(const Tensor& weights, double delta) {
    Tape tape;
    return tape.value(threshold_sparsify(tape, tape.input(weights), delta));
}

}  // namespace dmps
