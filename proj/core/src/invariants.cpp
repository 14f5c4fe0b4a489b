#include "dmps/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dmps/config.hpp"
#include "dmps/checkpoint.hpp"
#include "dmps/diffusion.hpp"
#include "dmps/gradcheck.hpp"
#include "dmps/harness.hpp"
#include "dmps/io.hpp"
#include "dmps/kernel.hpp"
#include "dmps/tape.hpp"
#include "dmps/tasks.hpp"

namespace dmps {

bool InvariantReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const InvariantResult& r) { return r.passed; });
}

bool check_row_stochastic(const Tensor& w, double tol, std::string* detail) {
    if (w.rows() != w.cols()) {
        if (detail != nullptr) *detail = "matrix is not square";
        return false;
    }
    for (int i = 0; i < w.rows(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < w.cols(); ++j) {
            if (w.at(i, j) < 0.0) {
                if (detail != nullptr)
                    *detail = "negative entry at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")";
                return false;
            }
            sum += w.at(i, j);
        }
        if (std::abs(sum - 1.0) > tol) {
            if (detail != nullptr)
                *detail = "row " + std::to_string(i) + " sums to " + format_double(sum);
            return false;
        }
    }
    return true;
}

std::vector<double> stationary_distribution(const Tensor& w, int max_iters, double tol) {
    const int n = w.rows();
    std::vector<double> pi(static_cast<size_t>(n), 1.0 / n);
    std::vector<double> next(static_cast<size_t>(n));
    for (int it = 0; it < max_iters; ++it) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += pi[static_cast<size_t>(i)] * w.at(i, j);
            next[static_cast<size_t>(j)] = s;
        }
        double total = 0.0;
        for (double v : next) total += v;
        for (double& v : next) v /= total;
        double delta = 0.0;
        for (int j = 0; j < n; ++j)
            delta = std::max(delta, std::abs(next[static_cast<size_t>(j)] - pi[static_cast<size_t>(j)]));
        pi.swap(next);
        if (delta < tol) break;
    }
    return pi;
}

Tensor deep_sets_reference(const Tensor& set_elements, const ParamStore& params,
                           const ModelConfig& cfg) {
    const int n = set_elements.rows();
    // Per-element chain: encoder layers then block layers, all plain loops.
    std::vector<std::vector<double>> features(static_cast<size_t>(n));
    for (int e = 0; e < n; ++e) {
        std::vector<double> h(static_cast<size_t>(set_elements.cols()));
        for (int j = 0; j < set_elements.cols(); ++j) h[static_cast<size_t>(j)] = set_elements.at(e, j);
        for (size_t l = 0; l + 1 < cfg.encoder.dims.size(); ++l) {
            const Tensor& w = params.value("encoder.w" + std::to_string(l));
            const Tensor& b = params.value("encoder.b" + std::to_string(l));
            std::vector<double> out(static_cast<size_t>(w.cols()));
            for (int c = 0; c < w.cols(); ++c) {
                double s = b[c];
                for (int r = 0; r < w.rows(); ++r) s += h[static_cast<size_t>(r)] * w.at(r, c);
                out[static_cast<size_t>(c)] = apply_activation(cfg.encoder.activation, s);
            }
            h = std::move(out);
        }
        for (int t = 0; t < cfg.blocks.count; ++t) {
            const Tensor& w = params.value("block" + std::to_string(t) + ".w");
            const Tensor& b = params.value("block" + std::to_string(t) + ".b");
            std::vector<double> out(static_cast<size_t>(w.cols()));
            for (int c = 0; c < w.cols(); ++c) {
                double s = b[c];
                for (int r = 0; r < w.rows(); ++r) s += h[static_cast<size_t>(r)] * w.at(r, c);
                out[static_cast<size_t>(c)] = apply_activation(cfg.blocks.nonlinearity, s);
            }
            h = std::move(out);
        }
        features[static_cast<size_t>(e)] = std::move(h);
    }

    const size_t width = features[0].size();
    std::vector<double> pooled(width, 0.0);
    for (size_t c = 0; c < width; ++c) {
        if (cfg.pooling == PoolMode::Max) {
            double best = features[0][c];
            for (int e = 1; e < n; ++e) best = std::max(best, features[static_cast<size_t>(e)][c]);
            pooled[c] = best;
        } else {
            double s = 0.0;
            for (int e = 0; e < n; ++e) s += features[static_cast<size_t>(e)][c];
            pooled[c] = cfg.pooling == PoolMode::Mean ? s / n : s;
        }
    }

    const Tensor& hw = params.value("head.w");
    const Tensor& hb = params.value("head.b");
    Tensor out(1, hw.cols());
    for (int c = 0; c < hw.cols(); ++c) {
        double s = hb[c];
        for (int r = 0; r < hw.rows(); ++r) s += pooled[static_cast<size_t>(r)] * hw.at(r, c);
        switch (cfg.head.transform) {
            case HeadTransform::Identity: out[c] = s; break;
            case HeadTransform::Sigmoid: out[c] = 1.0 / (1.0 + std::exp(-s)); break;
            case HeadTransform::Exp: out[c] = std::exp(s); break;
        }
    }
    return out;
}

Tensor random_row_stochastic(int n, SplitRng& rng, bool strictly_positive) {
    Tensor w(n, n);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            double v = rng.uniform();
            if (strictly_positive) v += 0.05;
            else if (v < 0.3) v = 0.0;  // sprinkle zeros
            w.at(i, j) = v;
            sum += v;
        }
        if (sum == 0.0) {
            w.at(i, i) = 1.0;
            sum = 1.0;
        }
        for (int j = 0; j < n; ++j) w.at(i, j) /= sum;
    }
    return w;
}

Tensor random_symmetric_doubly_stochastic(int n, SplitRng& rng) {
    // Sinkhorn on a symmetric positive matrix converges to a symmetric
    // doubly stochastic one.
    Tensor a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = 0.1 + rng.uniform();
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    for (int iter = 0; iter < 500; ++iter) {
        // Symmetric scaling step: divide rows and columns by sqrt(row sum).
        std::vector<double> r(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a.at(i, j);
            r[static_cast<size_t>(i)] = std::sqrt(s);
        }
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                a.at(i, j) /= r[static_cast<size_t>(i)] * r[static_cast<size_t>(j)];
            }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a.at(i, j);
            worst = std::max(worst, std::abs(s - 1.0));
        }
        if (worst < 1e-14) break;
    }
    // Exact row normalization to finish; symmetry error stays ~1e-14 and is
    // removed by averaging.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (a.at(i, j) + a.at(j, i));
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    return a;
}

namespace {

ModelConfig small_model(BlockKind kind, PoolMode pool, int in_dim, HeadTransform head) {
    ModelConfig cfg;
    cfg.encoder = {{in_dim, 8}, Activation::Tanh};
    cfg.kernel = {8, 8, 8, Activation::Tanh, Activation::Tanh, 1.0, 0.0};
    cfg.blocks.kind = kind;
    cfg.blocks.count = 2;
    cfg.blocks.nonlinearity = Activation::Tanh;
    cfg.blocks.gamma_mode = GammaMode::Learnable;
    cfg.pooling = pool;
    cfg.head = {3, head};
    return cfg;
}

Tensor random_matrix(int rows, int cols, SplitRng& rng, double scale = 1.0) {
    Tensor m(rows, cols);
    for (int i = 0; i < m.size(); ++i) m[i] = scale * rng.normal();
    return m;
}

}  // namespace

double max_invariance_deviation(const ModelConfig& cfg, int n_sets, int n_perms, uint64_t seed) {
    SplitRng rng(seed);
    SplitRng init = rng.split(1);
    ParamStore params = init_model_params(cfg, init);
    double worst = 0.0;
    for (int s = 0; s < n_sets; ++s) {
        SplitRng srng = rng.split(2, static_cast<uint64_t>(s));
        const int n = srng.uniform_int(3, 9);
        Tensor x = random_matrix(n, cfg.input_dim(), srng);
        const Tensor base = dmps_predict(x, params, cfg);
        for (int p = 0; p < n_perms; ++p) {
            std::vector<int> perm = srng.permutation(n);
            Tensor px = permute_rows(x, perm);
            const Tensor out = dmps_predict(px, params, cfg);
            for (int k = 0; k < base.size(); ++k) {
                const double dev = std::abs(out[k] - base[k]) / (std::abs(base[k]) + 1e-12);
                worst = std::max(worst, dev);
            }
        }
    }
    return worst;
}

double max_equivariance_deviation(BlockKind kind, int n_instances, uint64_t seed) {
    SplitRng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < n_instances; ++t) {
        SplitRng irng = rng.split(static_cast<uint64_t>(t));
        const int n = irng.uniform_int(3, 8);
        const int d = irng.uniform_int(2, 6);
        Tensor x = random_matrix(n, d, irng);
        Tensor w = random_row_stochastic(n, irng);
        Tensor hw = random_matrix(d, d, irng, 0.7);
        Tensor hb = random_matrix(1, d, irng, 0.3);
        const double gamma = irng.uniform(0.05, 0.95);
        std::vector<int> perm = irng.permutation(n);

        auto run_block = [&](const Tensor& xs, const Tensor& ws) {
            Tape tape;
            Value xv = tape.input(xs);
            Value wv = tape.input(ws);
            Value out;
            switch (kind) {
                case BlockKind::MessagePassing:
                    out = message_passing_step(tape, wv, xv);
                    break;
                case BlockKind::SetDenoising:
                    out = set_denoising_block(tape, wv, xv, tape.constant(gamma),
                                              tape.input(hw), tape.input(hb), Activation::Tanh);
                    break;
                case BlockKind::SetResidual:
                    out = set_residual_block(tape, wv, xv, tape.input(hw), tape.input(hb),
                                             Activation::Tanh);
                    break;
            }
            return tape.value(out);
        };

        const Tensor direct = run_block(x, w);
        const Tensor permuted = run_block(permute_rows(x, perm), permute_conjugate(w, perm));
        worst = std::max(worst, max_abs_diff(permuted, permute_rows(direct, perm)));
    }
    return worst;
}

double full_model_gradcheck(const ModelConfig& cfg, int n_sets, uint64_t seed) {
    SplitRng rng(seed);
    SplitRng init = rng.split(1);
    ParamStore params = init_model_params(cfg, init);
    double worst = 0.0;
    for (int s = 0; s < n_sets; ++s) {
        SplitRng srng = rng.split(2, static_cast<uint64_t>(s));
        Tensor x = random_matrix(4, cfg.input_dim(), srng);
        const double label = cfg.head.transform == HeadTransform::Exp
                                 ? static_cast<double>(srng.uniform_int(1, 5))
                                 : static_cast<double>(srng.uniform_int(0, 1));
        auto loss_fn = [&](ParamStore& ps) {
            Tape tape;
            Value pred = dmps_forward(tape, x, ps, cfg);
            Value loss = cfg.head.transform == HeadTransform::Exp
                             ? tape.poisson_nll(pred, static_cast<int>(label))
                             : tape.binary_cross_entropy(pred, label);
            return tape.value(loss).item();
        };
        params.zero_grads();
        {
            Tape tape;
            Value pred = dmps_forward(tape, x, params, cfg);
            Value loss = cfg.head.transform == HeadTransform::Exp
                             ? tape.poisson_nll(pred, static_cast<int>(label))
                             : tape.binary_cross_entropy(pred, label);
            tape.backward(loss);
        }
        GradCheckResult r = finite_difference_check(params, loss_fn);
        worst = std::max(worst, r.max_rel_err);
    }
    return worst;
}

double max_deep_sets_reduction_gap(int n_sets, uint64_t seed) {
    SplitRng rng(seed);
    ModelConfig cfg = small_model(BlockKind::MessagePassing, PoolMode::Sum, 3,
                                  HeadTransform::Identity);
    SplitRng init = rng.split(1);
    ParamStore params = init_model_params(cfg, init);
    double worst = 0.0;
    for (int s = 0; s < n_sets; ++s) {
        SplitRng srng = rng.split(2, static_cast<uint64_t>(s));
        const int n = srng.uniform_int(1, 8);
        Tensor x = random_matrix(n, cfg.input_dim(), srng);
        Tensor identity(n, n);
        for (int i = 0; i < n; ++i) identity.at(i, i) = 1.0;
        Tape tape;
        const Tensor model_out =
            tape.value(dmps_forward_fixed_graph(tape, x, params, cfg, identity));
        const Tensor ref_out = deep_sets_reference(x, params, cfg);
        worst = std::max(worst, max_abs_diff(model_out, ref_out));
    }
    return worst;
}

namespace {

using CheckFn = std::function<InvariantResult()>;

InvariantResult make_result(const std::string& name, bool passed, const std::string& detail) {
    return {name, passed, detail};
}

InvariantResult check_gradcheck_ops() {
    SplitRng rng(41);
    std::ostringstream why;
    bool ok = true;

    auto run_case = [&](const std::string& label, ParamStore& ps,
                        const std::function<Value(Tape&, ParamStore&)>& fwd) {
        auto loss_fn = [&](ParamStore& p) {
            Tape tape;
            return tape.value(fwd(tape, p)).item();
        };
        ps.zero_grads();
        {
            Tape tape;
            tape.backward(fwd(tape, ps));
        }
        GradCheckResult r = finite_difference_check(ps, loss_fn);
        if (!r.passed) {
            ok = false;
            why << label << " rel_err=" << r.max_rel_err << " at " << r.worst_param << "; ";
        }
    };

    {   // matmul + add_row_bias + activations + pools, one composite per op family
        ParamStore ps;
        SplitRng r1 = rng.split(1);
        auto& a = ps.create_glorot("a", 3, 4, r1);
        (void)a;
        ps.create_glorot("b", 4, 2, r1);
        ps.create("bias", 1, 2);
        Tensor probe = random_matrix(3, 2, r1);
        run_case("matmul", ps, [&](Tape& t, ParamStore& p) {
            Value m = t.matmul(t.param(p, "a"), t.param(p, "b"));
            m = t.add_row_bias(m, t.param(p, "bias"));
            return t.sum_all(t.multiply(m, t.input(probe)));
        });
    }
    for (Activation act : {Activation::Tanh, Activation::Sigmoid, Activation::Exp,
                           Activation::Softplus, Activation::Relu}) {
        ParamStore ps;
        SplitRng r2 = rng.split(2 + static_cast<uint64_t>(act));
        Tensor init = random_matrix(3, 3, r2);
        // Keep relu inputs away from the kink so central differences are valid.
        if (act == Activation::Relu)
            for (int i = 0; i < init.size(); ++i)
                if (std::abs(init[i]) < 0.05) init[i] = 0.2;
        ps.create("x", 3, 3) = init;
        Tensor probe = random_matrix(3, 3, r2);
        run_case(to_string(act), ps, [&, act](Tape& t, ParamStore& p) {
            return t.sum_all(t.multiply(t.elementwise(act, t.param(p, "x")), t.input(probe)));
        });
    }
    {   // softmax rows
        ParamStore ps;
        SplitRng r3 = rng.split(10);
        ps.create("x", 4, 4) = random_matrix(4, 4, r3);
        Tensor probe = random_matrix(4, 4, r3);
        run_case("softmax_rows", ps, [&](Tape& t, ParamStore& p) {
            return t.sum_all(t.multiply(t.softmax_rows(t.param(p, "x")), t.input(probe)));
        });
    }
    {   // rbf kernel wrt features and bandwidth
        ParamStore ps;
        SplitRng r4 = rng.split(11);
        ps.create("phi", 4, 3) = random_matrix(4, 3, r4);
        ps.create_scalar("sigma_raw", 0.3);
        Tensor probe = random_matrix(4, 4, r4);
        run_case("rbf_kernel", ps, [&](Tape& t, ParamStore& p) {
            Value sigma = t.elementwise(Activation::Softplus, t.param(p, "sigma_raw"));
            return t.sum_all(t.multiply(t.rbf_kernel(t.param(p, "phi"), sigma), t.input(probe)));
        });
    }
    {   // convex mix wrt coefficient and both operands
        ParamStore ps;
        SplitRng r5 = rng.split(12);
        ps.create("x", 3, 3) = random_matrix(3, 3, r5);
        ps.create("y", 3, 3) = random_matrix(3, 3, r5);
        ps.create_scalar("g_raw", 0.4);
        Tensor probe = random_matrix(3, 3, r5);
        run_case("convex_mix", ps, [&](Tape& t, ParamStore& p) {
            Value g = t.elementwise(Activation::Sigmoid, t.param(p, "g_raw"));
            return t.sum_all(t.multiply(t.convex_mix(g, t.param(p, "x"), t.param(p, "y")),
                                        t.input(probe)));
        });
    }
    {   // sparsify: threshold far from any entry so the mask is locally stable
        ParamStore ps;
        SplitRng r6 = rng.split(13);
        Tensor w = random_row_stochastic(4, r6);
        ps.create("w", 4, 4) = w;
        Tensor probe = random_matrix(4, 4, r6);
        run_case("sparsify_rows", ps, [&](Tape& t, ParamStore& p) {
            return t.sum_all(t.multiply(t.sparsify_rows(t.param(p, "w"), 0.12), t.input(probe)));
        });
    }
    for (PoolMode mode : {PoolMode::Sum, PoolMode::Mean, PoolMode::Max}) {
        ParamStore ps;
        SplitRng r7 = rng.split(14 + static_cast<uint64_t>(mode));
        ps.create("x", 5, 3) = random_matrix(5, 3, r7);
        Tensor probe = random_matrix(1, 3, r7);
        run_case("pool_" + to_string(mode), ps, [&, mode](Tape& t, ParamStore& p) {
            return t.sum_all(t.multiply(pool_set(t, t.param(p, "x"), mode), t.input(probe)));
        });
    }
    {   // losses
        ParamStore ps;
        ps.create_scalar("z", 0.3);
        run_case("binary_cross_entropy", ps, [&](Tape& t, ParamStore& p) {
            return t.binary_cross_entropy(t.elementwise(Activation::Sigmoid, t.param(p, "z")), 1.0);
        });
        ParamStore ps2;
        ps2.create_scalar("z", 0.5);
        run_case("poisson_nll", ps2, [&](Tape& t, ParamStore& p) {
            return t.poisson_nll(t.elementwise(Activation::Exp, t.param(p, "z")), 3);
        });
    }
    return make_result("autodiff.gradcheck_ops", ok, ok ? "all op gradients match central differences"
                                                        : why.str());
}

InvariantResult check_softmax_stochastic() {
    SplitRng rng(42);
    for (int t = 0; t < 50; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        const int n = r.uniform_int(1, 10);
        Tensor m = random_matrix(n, n, r, 3.0);
        Tape tape;
        const Tensor w = tape.value(tape.softmax_rows(tape.input(m)));
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            for (int j = 0; j < n; ++j) {
                if (!(w.at(i, j) > 0.0))
                    return make_result("autodiff.softmax_rows_stochastic", false,
                                       "nonpositive entry");
                sum += w.at(i, j);
            }
            if (std::abs(sum - 1.0) > 1e-9)
                return make_result("autodiff.softmax_rows_stochastic", false,
                                   "row sum off by " + format_double(sum - 1.0));
        }
    }
    return make_result("autodiff.softmax_rows_stochastic", true,
                       "50 random matrices: rows sum to 1 within 1e-9, all entries positive");
}

InvariantResult check_matmul_associativity() {
    SplitRng rng(43);
    double worst = 0.0;
    for (int t = 0; t < 30; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        const int a = r.uniform_int(2, 7), b = r.uniform_int(2, 7), c = r.uniform_int(2, 7),
                  d = r.uniform_int(2, 7);
        Tensor A = random_matrix(a, b, r), B = random_matrix(b, c, r), C = random_matrix(c, d, r);
        const Tensor left = matmul(matmul(A, B), C);
        const Tensor right = matmul(A, matmul(B, C));
        worst = std::max(worst, max_abs_diff(left, right) / std::max(1.0, max_abs(left)));
    }
    const bool ok = worst < 1e-8;
    return make_result("autodiff.matmul_associativity", ok,
                       "max relative deviation " + format_double(worst));
}

InvariantResult check_backward_deterministic() {
    auto run = [](ParamStore& ps) {
        SplitRng rng(44);
        ModelConfig cfg = small_model(BlockKind::SetDenoising, PoolMode::Mean, 3,
                                      HeadTransform::Sigmoid);
        SplitRng init = rng.split(1);
        ps = init_model_params(cfg, init);
        SplitRng data = rng.split(2);
        Tensor x = random_matrix(5, 3, data);
        ps.zero_grads();
        Tape tape;
        tape.backward(tape.binary_cross_entropy(dmps_forward(tape, x, ps, cfg), 1.0));
    };
    ParamStore first, second;
    run(first);
    run(second);
    for (const auto& name : first.names()) {
        const Tensor& a = first.grad(name);
        const Tensor& b = second.grad(name);
        for (int i = 0; i < a.size(); ++i)
            if (a[i] != b[i])
                return make_result("autodiff.backward_deterministic", false,
                                   "gradient of " + name + " differs between runs");
    }
    return make_result("autodiff.backward_deterministic", true,
                       "two full rebuild+backward runs produce bit-identical gradients");
}

InvariantResult check_conjugation_equivariance() {
    SplitRng rng(45);
    KernelConfig kcfg{3, 6, 4, Activation::Tanh, Activation::Tanh, 1.0, 0.0};
    ParamStore ps;
    SplitRng init = rng.split(1);
    init_kernel_params(ps, kcfg, init);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        SplitRng r = rng.split(2, static_cast<uint64_t>(t));
        const int n = r.uniform_int(2, 9);
        Tensor x = random_matrix(n, 3, r);
        std::vector<int> perm = r.permutation(n);
        LatentGraph g = build_latent_graph(x, ps, kcfg);
        LatentGraph gp = build_latent_graph(permute_rows(x, perm), ps, kcfg);
        worst = std::max(worst, max_abs_diff(gp.kernel, permute_conjugate(g.kernel, perm)));
        worst = std::max(worst, max_abs_diff(gp.weights, permute_conjugate(g.weights, perm)));
    }
    const bool ok = worst <= 1e-12;
    return make_result("latent_graph.conjugation_equivariance", ok,
                       "max deviation " + format_double(worst));
}

InvariantResult check_kernel_symmetry() {
    SplitRng rng(46);
    KernelConfig kcfg{4, 6, 5, Activation::Tanh, Activation::Tanh, 0.8, 0.0};
    ParamStore ps;
    SplitRng init = rng.split(1);
    init_kernel_params(ps, kcfg, init);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        SplitRng r = rng.split(2, static_cast<uint64_t>(t));
        Tensor x = random_matrix(r.uniform_int(2, 9), 4, r);
        LatentGraph g = build_latent_graph(x, ps, kcfg);
        worst = std::max(worst, max_abs_diff(g.kernel, transpose(g.kernel)));
        for (int i = 0; i < g.kernel.rows(); ++i)
            worst = std::max(worst, std::abs(g.kernel.at(i, i) - 1.0));
    }
    const bool ok = worst < 1e-12;
    return make_result("latent_graph.kernel_symmetry", ok,
                       "max |K - K^T| and diagonal deviation " + format_double(worst));
}

InvariantResult check_latent_graph_differentiability() {
    SplitRng rng(47);
    KernelConfig kcfg{3, 5, 4, Activation::Tanh, Activation::Tanh, 1.2, 0.0};
    ParamStore ps;
    SplitRng init = rng.split(1);
    init_kernel_params(ps, kcfg, init);
    SplitRng data = rng.split(2);
    Tensor x = random_matrix(5, 3, data);
    Tensor probe = random_matrix(5, 5, data);
    auto loss_fn = [&](ParamStore& p) {
        Tape tape;
        TrackedLatentGraph g = build_latent_graph(tape, tape.input(x), p, kcfg);
        return tape.value(tape.sum_all(tape.multiply(g.weights, tape.input(probe)))).item();
    };
    ps.zero_grads();
    {
        Tape tape;
        TrackedLatentGraph g = build_latent_graph(tape, tape.input(x), ps, kcfg);
        tape.backward(tape.sum_all(tape.multiply(g.weights, tape.input(probe))));
    }
    GradCheckResult r = finite_difference_check(ps, loss_fn);
    return make_result("latent_graph.differentiability", r.passed,
                       "scalar-of-W gradients vs central differences, max rel err " +
                           format_double(r.max_rel_err));
}

InvariantResult check_block_equivariance() {
    double worst = 0.0;
    for (BlockKind kind :
         {BlockKind::MessagePassing, BlockKind::SetDenoising, BlockKind::SetResidual})
        worst = std::max(worst, max_equivariance_deviation(kind, 40, 48));
    const bool ok = worst <= 1e-12;
    return make_result("set_blocks.block_equivariance", ok,
                       "max |B(PX;PWP^T) - P B(X;W)| = " + format_double(worst));
}

InvariantResult check_model_invariance() {
    double worst = 0.0;
    for (PoolMode pool : {PoolMode::Sum, PoolMode::Mean, PoolMode::Max}) {
        ModelConfig cfg = small_model(BlockKind::SetDenoising, pool, 3, HeadTransform::Identity);
        worst = std::max(worst, max_invariance_deviation(cfg, 100, 2, 49));
    }
    const bool ok = worst < 1e-6;
    return make_result("set_blocks.model_invariance", ok,
                       "max relative deviation over permutations " + format_double(worst));
}

InvariantResult check_deep_sets_reduction() {
    const double gap = max_deep_sets_reduction_gap(50, 50);
    return make_result("set_blocks.deep_sets_reduction", gap <= 1e-10,
                       "max |identity-graph model - per-element reference| = " +
                           format_double(gap));
}

InvariantResult check_oscillation_contraction() {
    SplitRng rng(51);
    for (int t = 0; t < 50; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        const int n = r.uniform_int(2, 8);
        const bool positive = t % 2 == 0;
        Tensor w = random_row_stochastic(n, r, positive);
        Tensor x = random_matrix(n, r.uniform_int(1, 5), r);
        const Tensor wx = matmul(w, x);
        for (int j = 0; j < x.cols(); ++j) {
            double lo = x.at(0, j), hi = x.at(0, j), lo2 = wx.at(0, j), hi2 = wx.at(0, j);
            for (int i = 1; i < n; ++i) {
                lo = std::min(lo, x.at(i, j));
                hi = std::max(hi, x.at(i, j));
                lo2 = std::min(lo2, wx.at(i, j));
                hi2 = std::max(hi2, wx.at(i, j));
            }
            if (hi2 - lo2 > (hi - lo) + 1e-12)
                return make_result("set_blocks.oscillation_contraction", false,
                                   "range grew under message passing");
            double min_w = 1.0;
            for (int i = 0; i < w.size(); ++i) min_w = std::min(min_w, w[i]);
            if (positive && min_w > 0.0 && n > 1 && hi - lo > 1e-9 &&
                !(hi2 - lo2 < hi - lo))
                return make_result("set_blocks.oscillation_contraction", false,
                                   "no strict decrease for strictly positive W");
        }
    }
    return make_result("set_blocks.oscillation_contraction", true,
                       "row ranges never expand; strict decrease under positive W");
}

InvariantResult check_energy_descent() {
    SplitRng rng(52);
    for (int t = 0; t < 50; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        const int n = r.uniform_int(3, 8);
        Tensor w = random_symmetric_doubly_stochastic(n, r);
        Tensor x = random_matrix(n, r.uniform_int(1, 4), r);
        const double s = r.uniform(0.05, 1.0);
        const WeightedGraph g = symmetrize_for_energy_test(w);
        double prev = dirichlet_energy(x, g);
        for (int step = 0; step < 20; ++step) {
            x = diffusion_step(x, w, s);
            const double e = dirichlet_energy(x, g);
            if (e > prev * (1.0 + 1e-12) + 1e-15)
                return make_result("diffusion.energy_descent", false,
                                   "energy rose from " + format_double(prev) + " to " +
                                       format_double(e));
            prev = e;
        }
    }
    return make_result("diffusion.energy_descent", true,
                       "50 random symmetric instances, 20 steps each: non-increasing energy");
}

InvariantResult check_oscillation_nonexpansion() {
    SplitRng rng(53);
    for (int t = 0; t < 50; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        const int n = r.uniform_int(2, 8);
        Tensor w = random_row_stochastic(n, r, t % 2 == 0);
        Tensor x = random_matrix(n, r.uniform_int(1, 4), r);
        const double s = r.uniform(0.05, 1.0);
        const double before = oscillation_index(x);
        const Tensor x2 = diffusion_step(x, w, s);
        const double after = oscillation_index(x2);
        if (after > before + 1e-12)
            return make_result("diffusion.oscillation_nonexpansion", false,
                               "oscillation grew from " + format_double(before) + " to " +
                                   format_double(after));
        // Effective matrix (1-s) I + s W strictly positive => strict decrease.
        double min_eff = 1.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                min_eff = std::min(min_eff,
                                   (i == j ? 1.0 - s : 0.0) + s * w.at(i, j));
        if (min_eff > 0.0 && n > 1 && before > 1e-9 && !(after < before))
            return make_result("diffusion.oscillation_nonexpansion", false,
                               "no strict decrease under strictly positive mixing");
    }
    return make_result("diffusion.oscillation_nonexpansion", true,
                       "oscillation index never expands; strict decrease under positive mixing");
}

InvariantResult check_mass_conservation() {
    SplitRng rng(54);
    for (int t = 0; t < 30; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        const int n = r.uniform_int(2, 7);
        Tensor w = random_symmetric_doubly_stochastic(n, r);
        Tensor x = random_matrix(n, r.uniform_int(1, 4), r);
        const double s = r.uniform(0.05, 1.0);
        const Tensor x2 = diffusion_step(x, w, s);
        for (int j = 0; j < x.cols(); ++j) {
            double before = 0.0, after = 0.0;
            for (int i = 0; i < n; ++i) {
                before += x.at(i, j);
                after += x2.at(i, j);
            }
            if (std::abs(before - after) > 1e-10)
                return make_result("diffusion.mass_conservation", false,
                                   "column sum drifted by " + format_double(after - before));
        }
    }
    return make_result("diffusion.mass_conservation", true,
                       "doubly stochastic steps preserve column sums within 1e-10");
}

InvariantResult check_steady_state_oracle() {
    SplitRng rng(55);
    for (int t = 0; t < 20; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        Tensor w = random_row_stochastic(5, r, true);
        Tensor x0 = random_matrix(5, 3, r);
        DiffusionTrace trace = simulate_to_steady_state(x0, w, 1.0, 1e-10, 20000);
        if (!trace.converged)
            return make_result("diffusion.steady_state_oracle", false,
                               "positive stochastic chain failed to converge");
        const std::vector<double> pi = stationary_distribution(w);
        const Tensor& limit = trace.states.back();
        for (int j = 0; j < x0.cols(); ++j) {
            double target = 0.0;
            for (int i = 0; i < 5; ++i) target += pi[static_cast<size_t>(i)] * x0.at(i, j);
            for (int i = 0; i < 5; ++i)
                if (std::abs(limit.at(i, j) - target) > 1e-6)
                    return make_result("diffusion.steady_state_oracle", false,
                                       "limit row deviates from pi^T X0 by " +
                                           format_double(limit.at(i, j) - target));
        }
    }
    return make_result("diffusion.steady_state_oracle", true,
                       "limits match the power-iteration stationary vector to 1e-6");
}

InvariantResult check_covariance_pd() {
    for (double rho : {0.0, 0.25, 0.5, 0.75, 0.95, 0.999}) {
        try {
            cholesky_lower(build_covariance(rho));
        } catch (const std::exception& e) {
            return make_result("tasks.covariance_positive_definite", false,
                               "cholesky failed at rho=" + format_double(rho));
        }
    }
    bool boundary_failed = false;
    try {
        Tensor sigma = build_covariance(0.5);
        sigma.at(1, 3) = 1.0;
        sigma.at(3, 1) = 1.0;
        cholesky_lower(sigma);
    } catch (const ConfigError&) {
        boundary_failed = true;
    }
    return make_result("tasks.covariance_positive_definite", boundary_failed,
                       boundary_failed ? "PD on [0,1); singular at rho=1 rejected"
                                       : "rho=1 was not rejected");
}

InvariantResult check_counting_label_bounds() {
    CountingTaskSpec spec;
    SplitRng rng(56);
    for (int t = 0; t < 2000; ++t) {
        SplitRng r = rng.split(static_cast<uint64_t>(t));
        CountingSample s = sample_counting_set(spec, r);
        const int n = s.elements.rows();
        if (!(1 <= s.count && s.count <= n && n >= spec.n_min && n <= spec.n_max))
            return make_result("tasks.counting_label_bounds", false,
                               "violated 1 <= c <= n <= " + std::to_string(spec.n_max));
    }
    return make_result("tasks.counting_label_bounds", true,
                       "2000 draws satisfy 1 <= c <= n <= 10");
}

InvariantResult check_generator_determinism() {
    CountingTaskSpec spec;
    SplitRng a(77), b(77), c(78);
    for (int t = 0; t < 50; ++t) {
        SplitRng ra = a.split(static_cast<uint64_t>(t));
        SplitRng rb = b.split(static_cast<uint64_t>(t));
        CountingSample sa = sample_counting_set(spec, ra);
        CountingSample sb = sample_counting_set(spec, rb);
        if (sa.count != sb.count || max_abs_diff(sa.elements, sb.elements) != 0.0)
            return make_result("tasks.generator_determinism", false,
                               "same seed produced different sets");
    }
    // Distinct seeds should decorrelate: compare long uniform streams.
    SplitRng s1(77), s2(78);
    double corr = 0.0;
    const int m = 4096;
    double mean1 = 0.0, mean2 = 0.0;
    std::vector<double> u1(m), u2(m);
    for (int i = 0; i < m; ++i) {
        u1[static_cast<size_t>(i)] = s1.uniform();
        u2[static_cast<size_t>(i)] = s2.uniform();
        mean1 += u1[static_cast<size_t>(i)];
        mean2 += u2[static_cast<size_t>(i)];
    }
    mean1 /= m;
    mean2 /= m;
    double num = 0.0, d1 = 0.0, d2 = 0.0;
    for (int i = 0; i < m; ++i) {
        num += (u1[static_cast<size_t>(i)] - mean1) * (u2[static_cast<size_t>(i)] - mean2);
        d1 += (u1[static_cast<size_t>(i)] - mean1) * (u1[static_cast<size_t>(i)] - mean1);
        d2 += (u2[static_cast<size_t>(i)] - mean2) * (u2[static_cast<size_t>(i)] - mean2);
    }
    corr = num / std::sqrt(d1 * d2);
    const bool ok = std::abs(corr) < 0.08;  // ~5 sigma for 4096 samples
    return make_result("tasks.generator_determinism", ok,
                       "seeded replay identical; cross-seed correlation " + format_double(corr));
}

RunConfig tiny_gaussian_config(const std::filesystem::path& out_dir) {
    RunConfig cfg = default_config("gaussian");
    cfg.model.encoder = {{1, 8}, Activation::Relu};
    cfg.model.kernel = {8, 8, 8, Activation::Relu, Activation::Relu, 1.0, 0.0};
    cfg.model.blocks.count = 2;
    cfg.batches = 25;
    cfg.batch_size = 8;
    cfg.eval_sets = 64;
    cfg.eval_interval = 0;
    cfg.log_interval = 5;
    cfg.seed = 9;
    cfg.out_dir = out_dir.string();
    return cfg;
}

InvariantResult check_harness_determinism(const std::filesystem::path& work) {
    const auto dir_a = work / "det_a";
    const auto dir_b = work / "det_b";
    RunConfig cfg_a = tiny_gaussian_config(dir_a);
    RunConfig cfg_b = tiny_gaussian_config(dir_b);
    train(cfg_a, true, true);
    train(cfg_b, true, true);
    for (const char* file : {"metrics.jsonl", "checkpoint.bin", "config.json"}) {
        const std::string a = read_text_file(dir_a / file);
        std::string b = read_text_file(dir_b / file);
        if (file == std::string("config.json")) {
            // out_dir intentionally differs; normalize it away.
            size_t pos;
            while ((pos = b.find("det_b")) != std::string::npos) b.replace(pos, 5, "det_a");
        }
        if (a != b)
            return make_result("harness.training_determinism", false,
                               std::string(file) + " differs between identical runs");
    }
    return make_result("harness.training_determinism", true,
                       "identical config + seed give byte-identical outputs");
}

InvariantResult check_harness_outputs(const std::filesystem::path& work) {
    const auto dir = work / "outputs";
    RunConfig cfg = tiny_gaussian_config(dir);
    TrainResult r = train(cfg, true, true);
    if (!(r.final_accuracy >= 0.0 && r.final_accuracy <= 1.0))
        return make_result("harness.run_outputs_valid", false, "accuracy outside [0,1]");

    export_kernel(r.params, cfg, dir, 16, 2);
    const Tensor w = read_matrix_csv(dir / "weights_set_0.csv");
    std::string why;
    if (!check_row_stochastic(w, 1e-9, &why))
        return make_result("harness.run_outputs_valid", false, "exported W: " + why);
    const Tensor k = read_matrix_csv(dir / "kernel_set_0.csv");
    if (max_abs_diff(k, transpose(k)) > 1e-12)
        return make_result("harness.run_outputs_valid", false, "exported K not symmetric");

    // Evaluation must not mutate the checkpoint it reads.
    const std::string before = read_text_file(dir / "checkpoint.bin");
    Checkpoint ckpt = load_checkpoint(dir / "checkpoint.bin");
    evaluate(ckpt.params, cfg, 32, streams::kEval);
    const std::string after = read_text_file(dir / "checkpoint.bin");
    if (before != after)
        return make_result("harness.run_outputs_valid", false,
                           "evaluation mutated the checkpoint file");
    return make_result("harness.run_outputs_valid", true,
                       "accuracies in [0,1]; exported W row-stochastic, K symmetric; "
                       "checkpoint untouched by evaluation");
}

}  // namespace

InvariantReport run_invariant_suite(const std::filesystem::path& work_dir) {
    std::filesystem::create_directories(work_dir);
    InvariantReport report;
    const std::vector<std::pair<std::string, CheckFn>> checks = {
        {"autodiff.gradcheck_ops", check_gradcheck_ops},
        {"autodiff.softmax_rows_stochastic", check_softmax_stochastic},
        {"autodiff.matmul_associativity", check_matmul_associativity},
        {"autodiff.backward_deterministic", check_backward_deterministic},
        {"latent_graph.conjugation_equivariance", check_conjugation_equivariance},
        {"latent_graph.kernel_symmetry", check_kernel_symmetry},
        {"latent_graph.differentiability", check_latent_graph_differentiability},
        {"set_blocks.block_equivariance", check_block_equivariance},
        {"set_blocks.model_invariance", check_model_invariance},
        {"set_blocks.deep_sets_reduction", check_deep_sets_reduction},
        {"set_blocks.oscillation_contraction", check_oscillation_contraction},
        {"diffusion.energy_descent", check_energy_descent},
        {"diffusion.oscillation_nonexpansion", check_oscillation_nonexpansion},
        {"diffusion.mass_conservation", check_mass_conservation},
        {"diffusion.steady_state_oracle", check_steady_state_oracle},
        {"tasks.covariance_positive_definite", check_covariance_pd},
        {"tasks.counting_label_bounds", check_counting_label_bounds},
        {"tasks.generator_determinism", check_generator_determinism},
        {"harness.training_determinism", [&] { return check_harness_determinism(work_dir); }},
        {"harness.run_outputs_valid", [&] { return check_harness_outputs(work_dir); }},
    };
    for (const auto& [name, check] : checks) {
        try {
            InvariantResult r = check();
            r.name = name;
            report.checks.push_back(std::move(r));
        } catch (const std::exception& e) {
            report.checks.push_back({name, false, std::string("exception: ") + e.what()});
        }
    }
    return report;
}

std::string report_to_json(const InvariantReport& report) {
    nlohmann::ordered_json j;
    j["all_passed"] = report.all_passed();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : report.checks)
        j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return j.dump(2) + "\n";
}

void write_report_json(const InvariantReport& report, const std::filesystem::path& path) {
    write_text_file(path, report_to_json(report));
}

}  // namespace dmps
