#include "dmps/tape.hpp"

#include <algorithm>
#include <cmath>

#include "dmps/errors.hpp"

namespace dmps {

namespace {

constexpr double kProbClamp = 1e-12;

std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

double activation_grad(Activation a, double x, double y) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Exp: return y;
        case Activation::Softplus: return 1.0 / (1.0 + std::exp(-x));
    }
    return 0.0;
}

}  // namespace

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Exp: return std::exp(x);
        case Activation::Softplus:
            // log1p(exp(x)) without overflow for large x.
            return x > 30.0 ? x : std::log1p(std::exp(x));
    }
    return x;
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "exp") return Activation::Exp;
    if (s == "softplus") return Activation::Softplus;
    throw ConfigError("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Exp: return "exp";
        case Activation::Softplus: return "softplus";
    }
    return "identity";
}

const Tape::Node& Tape::node(int id) const { return nodes_[static_cast<size_t>(id)]; }
Tape::Node& Tape::node(int id) { return nodes_[static_cast<size_t>(id)]; }

Value Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_tape(Value a, Value b) const {
    if (a.tape != this || b.tape != this)
        throw DimensionError("operands recorded on different computation records");
}

void Tape::clear() { nodes_.clear(); }

Value Tape::input(Tensor x) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(x);
    return push(std::move(n));
}

Value Tape::constant(double v) { return input(Tensor::scalar(v)); }

Value Tape::param(ParamStore& store, const std::string& name) {
    Node n;
    n.op = Op::Param;
    n.value = store.value(name);
    n.store = &store;
    n.pname = name;
    n.requires_grad = true;
    return push(std::move(n));
}

Value Tape::matmul(Value a, Value b) {
    check_same_tape(a, b);
    const Tensor& av = node(a.id).value;
    const Tensor& bv = node(b.id).value;
    if (av.cols() != bv.rows())
        throw DimensionError("matmul shape mismatch: " + shape_str(av) + " * " + shape_str(bv));
    Node n;
    n.op = Op::Matmul;
    n.a = a.id;
    n.b = b.id;
    n.value = dmps::matmul(av, bv);
    n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
    return push(std::move(n));
}

Value Tape::add(Value a, Value b) {
    check_same_tape(a, b);
    Node n;
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    n.value = dmps::add(node(a.id).value, node(b.id).value);
    n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
    return push(std::move(n));
}

Value Tape::subtract(Value a, Value b) {
    check_same_tape(a, b);
    Node n;
    n.op = Op::Subtract;
    n.a = a.id;
    n.b = b.id;
    n.value = dmps::subtract(node(a.id).value, node(b.id).value);
    n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
    return push(std::move(n));
}

Value Tape::multiply(Value a, Value b) {
    check_same_tape(a, b);
    const Tensor& av = node(a.id).value;
    const Tensor& bv = node(b.id).value;
    if (!av.same_shape(bv))
        throw DimensionError("multiply shape mismatch: " + shape_str(av) + " vs " + shape_str(bv));
    Node n;
    n.op = Op::Multiply;
    n.a = a.id;
    n.b = b.id;
    n.value = av;
    for (int i = 0; i < n.value.size(); ++i) n.value[i] *= bv[i];
    n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
    return push(std::move(n));
}

Value Tape::scale(Value a, double c) {
    Node n;
    n.op = Op::ScaleConst;
    n.a = a.id;
    n.c0 = c;
    n.value = dmps::scale(node(a.id).value, c);
    n.requires_grad = node(a.id).requires_grad;
    return push(std::move(n));
}

Value Tape::add_row_bias(Value x, Value bias) {
    check_same_tape(x, bias);
    const Tensor& xv = node(x.id).value;
    const Tensor& bv = node(bias.id).value;
    if (bv.rows() != 1 || bv.cols() != xv.cols())
        throw DimensionError("row bias must be 1x" + std::to_string(xv.cols()) +
                             ", got " + shape_str(bv));
    Node n;
    n.op = Op::AddRowBias;
    n.a = x.id;
    n.b = bias.id;
    n.value = xv;
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < xv.cols(); ++j) n.value.at(i, j) += bv[j];
    n.requires_grad = node(x.id).requires_grad || node(bias.id).requires_grad;
    return push(std::move(n));
}

Value Tape::elementwise(Activation f, Value x) {
    Node n;
    n.op = Op::Elementwise;
    n.a = x.id;
    n.c0 = static_cast<double>(static_cast<int>(f));
    n.value = node(x.id).value;
    for (int i = 0; i < n.value.size(); ++i) n.value[i] = apply_activation(f, n.value[i]);
    n.requires_grad = node(x.id).requires_grad;
    return push(std::move(n));
}

Value Tape::softmax_rows(Value m) {
    const Tensor& mv = node(m.id).value;
    Node n;
    n.op = Op::SoftmaxRows;
    n.a = m.id;
    n.value = Tensor(mv.rows(), mv.cols());
    for (int i = 0; i < mv.rows(); ++i) {
        // Row-max subtraction keeps exp() bounded for large logits.
        double mx = mv.at(i, 0);
        for (int j = 1; j < mv.cols(); ++j) mx = std::max(mx, mv.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < mv.cols(); ++j) {
            const double e = std::exp(mv.at(i, j) - mx);
            n.value.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < mv.cols(); ++j) n.value.at(i, j) /= sum;
    }
    n.requires_grad = node(m.id).requires_grad;
    return push(std::move(n));
}

Value Tape::rbf_kernel(Value features, Value bandwidth) {
    check_same_tape(features, bandwidth);
    const Tensor& phi = node(features.id).value;
    const Tensor& sig = node(bandwidth.id).value;
    const double s = sig.item();
    if (!(s > 0.0)) throw NumericalError("rbf bandwidth must be positive");
    const int nrows = phi.rows();
    Node n;
    n.op = Op::RbfKernel;
    n.a = features.id;
    n.b = bandwidth.id;
    n.value = Tensor(nrows, nrows);
    const double inv = 1.0 / (2.0 * s * s);
    for (int i = 0; i < nrows; ++i) {
        n.value.at(i, i) = 1.0;
        for (int j = i + 1; j < nrows; ++j) {
            double d2 = 0.0;
            for (int k = 0; k < phi.cols(); ++k) {
                const double d = phi.at(i, k) - phi.at(j, k);
                d2 += d * d;
            }
            const double k = std::exp(-d2 * inv);
            n.value.at(i, j) = k;
            n.value.at(j, i) = k;
        }
    }
    n.requires_grad = node(features.id).requires_grad || node(bandwidth.id).requires_grad;
    return push(std::move(n));
}

Value Tape::convex_mix(Value coeff, Value x, Value y) {
    check_same_tape(coeff, x);
    check_same_tape(x, y);
    const double g = node(coeff.id).value.item();
    const Tensor& xv = node(x.id).value;
    const Tensor& yv = node(y.id).value;
    if (!xv.same_shape(yv))
        throw DimensionError("convex_mix shape mismatch: " + shape_str(xv) + " vs " + shape_str(yv));
    Node n;
    n.op = Op::ConvexMix;
    n.a = coeff.id;
    n.b = x.id;
    n.c = y.id;
    n.value = Tensor(xv.rows(), xv.cols());
    for (int i = 0; i < xv.size(); ++i) n.value[i] = (1.0 - g) * xv[i] + g * yv[i];
    n.requires_grad = node(coeff.id).requires_grad || node(x.id).requires_grad ||
                      node(y.id).requires_grad;
    return push(std::move(n));
}

Value Tape::sparsify_rows(Value w, double threshold) {
    if (!(threshold >= 0.0 && threshold < 1.0))
        throw ConfigError("sparsification threshold must lie in [0, 1)");
    const Tensor& wv = node(w.id).value;
    if (wv.rows() != wv.cols())
        throw DimensionError("sparsify_rows needs a square matrix, got " + shape_str(wv));
    Node n;
    n.op = Op::SparsifyRows;
    n.a = w.id;
    n.c0 = threshold;
    n.value = Tensor(wv.rows(), wv.cols());
    for (int i = 0; i < wv.rows(); ++i) {
        double kept = 0.0;
        for (int j = 0; j < wv.cols(); ++j)
            if (wv.at(i, j) >= threshold) kept += wv.at(i, j);
        if (kept > 0.0) {
            for (int j = 0; j < wv.cols(); ++j)
                n.value.at(i, j) = wv.at(i, j) >= threshold ? wv.at(i, j) / kept : 0.0;
        } else {
            // Every entry fell below the threshold: keep only the self-weight.
            n.value.at(i, i) = 1.0;
        }
    }
    n.requires_grad = node(w.id).requires_grad;
    return push(std::move(n));
}

Value Tape::pool_sum(Value x) {
    const Tensor& xv = node(x.id).value;
    if (xv.rows() < 1) throw DimensionError("pooling over an empty set is undefined");
    Node n;
    n.op = Op::PoolSum;
    n.a = x.id;
    n.value = Tensor(1, xv.cols());
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < xv.cols(); ++j) n.value[j] += xv.at(i, j);
    n.requires_grad = node(x.id).requires_grad;
    return push(std::move(n));
}

Value Tape::pool_mean(Value x) {
    const Tensor& xv = node(x.id).value;
    if (xv.rows() < 1) throw DimensionError("pooling over an empty set is undefined");
    Node n;
    n.op = Op::PoolMean;
    n.a = x.id;
    n.value = Tensor(1, xv.cols());
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < xv.cols(); ++j) n.value[j] += xv.at(i, j);
    for (int j = 0; j < xv.cols(); ++j) n.value[j] /= xv.rows();
    n.requires_grad = node(x.id).requires_grad;
    return push(std::move(n));
}

Value Tape::pool_max(Value x) {
    const Tensor& xv = node(x.id).value;
    if (xv.rows() < 1) throw DimensionError("pooling over an empty set is undefined");
    Node n;
    n.op = Op::PoolMax;
    n.a = x.id;
    n.value = Tensor(1, xv.cols());
    n.arg_index.assign(static_cast<size_t>(xv.cols()), 0);
    for (int j = 0; j < xv.cols(); ++j) {
        double best = xv.at(0, j);
        int arg = 0;
        for (int i = 1; i < xv.rows(); ++i) {
            if (xv.at(i, j) > best) {
                best = xv.at(i, j);
                arg = i;
            }
        }
        n.value[j] = best;
        n.arg_index[static_cast<size_t>(j)] = arg;
    }
    n.requires_grad = node(x.id).requires_grad;
    return push(std::move(n));
}

Value Tape::sum_all(Value x) {
    const Tensor& xv = node(x.id).value;
    Node n;
    n.op = Op::SumAll;
    n.a = x.id;
    double s = 0.0;
    for (int i = 0; i < xv.size(); ++i) s += xv[i];
    n.value = Tensor::scalar(s);
    n.requires_grad = node(x.id).requires_grad;
    return push(std::move(n));
}

Value Tape::binary_cross_entropy(Value prob, double label) {
    const double p = std::clamp(node(prob.id).value.item(), kProbClamp, 1.0 - kProbClamp);
    Node n;
    n.op = Op::BinaryCrossEntropy;
    n.a = prob.id;
    n.c0 = label;
    n.value = Tensor::scalar(-(label * std::log(p) + (1.0 - label) * std::log(1.0 - p)));
    n.requires_grad = node(prob.id).requires_grad;
    return push(std::move(n));
}

Value Tape::poisson_nll(Value rate, int count) {
    if (count < 0) throw DimensionError("poisson_nll count must be nonnegative");
    const double lam = node(rate.id).value.item();
    if (!(lam > 0.0)) throw NumericalError("poisson_nll rate must be positive");
    Node n;
    n.op = Op::PoissonNll;
    n.a = rate.id;
    n.c0 = static_cast<double>(count);
    const double log_term = count > 0 ? count * std::log(lam) : 0.0;
    n.value = Tensor::scalar(lam - log_term + std::lgamma(count + 1.0));
    n.requires_grad = node(rate.id).requires_grad;
    return push(std::move(n));
}

void Tape::backward(Value loss) {
    if (loss.tape != this) throw DimensionError("loss recorded on a different record");
    Node& top = node(loss.id);
    if (top.value.rows() != 1 || top.value.cols() != 1)
        throw DimensionError("backward requires a scalar loss, got " + shape_str(top.value));

    for (int id = 0; id <= loss.id; ++id) {
        Node& n = node(id);
        if (n.requires_grad && !n.grad.same_shape(n.value))
            n.grad = Tensor(n.value.rows(), n.value.cols());
        else if (n.requires_grad)
            n.grad.zero();
    }
    if (!top.requires_grad) return;  // loss does not depend on any parameter
    top.grad[0] = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        Node& n = node(id);
        if (!n.requires_grad) continue;
        const Tensor& g = n.grad;
        auto grad_of = [&](int in) -> Tensor* {
            return in >= 0 && node(in).requires_grad ? &node(in).grad : nullptr;
        };
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Param:
                n.store->grad(n.pname) = dmps::add(n.store->grad(n.pname), g);
                n.store->mark_grad_ready(n.pname);
                break;
            case Op::Matmul: {
                const Tensor& av = node(n.a).value;
                const Tensor& bv = node(n.b).value;
                if (Tensor* ga = grad_of(n.a)) {
                    // ga += g * b^T
                    for (int i = 0; i < av.rows(); ++i)
                        for (int k = 0; k < av.cols(); ++k) {
                            double acc = 0.0;
                            for (int j = 0; j < bv.cols(); ++j) acc += g.at(i, j) * bv.at(k, j);
                            ga->at(i, k) += acc;
                        }
                }
                if (Tensor* gb = grad_of(n.b)) {
                    // gb += a^T * g
                    for (int i = 0; i < av.rows(); ++i)
                        for (int k = 0; k < av.cols(); ++k) {
                            const double aik = av.at(i, k);
                            for (int j = 0; j < bv.cols(); ++j)
                                gb->at(k, j) += aik * g.at(i, j);
                        }
                }
                break;
            }
            case Op::Add: {
                if (Tensor* ga = grad_of(n.a))
                    for (int i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                if (Tensor* gb = grad_of(n.b))
                    for (int i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
                break;
            }
            case Op::Subtract: {
                if (Tensor* ga = grad_of(n.a))
                    for (int i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                if (Tensor* gb = grad_of(n.b))
                    for (int i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
                break;
            }
            case Op::Multiply: {
                const Tensor& av = node(n.a).value;
                const Tensor& bv = node(n.b).value;
                if (Tensor* ga = grad_of(n.a))
                    for (int i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
                if (Tensor* gb = grad_of(n.b))
                    for (int i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
                break;
            }
            case Op::ScaleConst: {
                if (Tensor* ga = grad_of(n.a))
                    for (int i = 0; i < g.size(); ++i) (*ga)[i] += n.c0 * g[i];
                break;
            }
            case Op::AddRowBias: {
                if (Tensor* gx = grad_of(n.a))
                    for (int i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                if (Tensor* gb = grad_of(n.b))
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < g.cols(); ++j) (*gb)[j] += g.at(i, j);
                break;
            }
            case Op::Elementwise: {
                if (Tensor* ga = grad_of(n.a)) {
                    const Activation f = static_cast<Activation>(static_cast<int>(n.c0));
                    const Tensor& xv = node(n.a).value;
                    for (int i = 0; i < g.size(); ++i)
                        (*ga)[i] += g[i] * activation_grad(f, xv[i], n.value[i]);
                }
                break;
            }
            case Op::SoftmaxRows: {
                if (Tensor* ga = grad_of(n.a)) {
                    const Tensor& y = n.value;
                    for (int i = 0; i < y.rows(); ++i) {
                        double dot = 0.0;
                        for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
                        for (int j = 0; j < y.cols(); ++j)
                            ga->at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                    }
                }
                break;
            }
            case Op::RbfKernel: {
                const Tensor& phi = node(n.a).value;
                const double s = node(n.b).value.item();
                const Tensor& k = n.value;
                Tensor* gphi = grad_of(n.a);
                Tensor* gsig = grad_of(n.b);
                const double inv_s2 = 1.0 / (s * s);
                double sig_acc = 0.0;
                const int nr = phi.rows();
                for (int i = 0; i < nr; ++i) {
                    for (int j = 0; j < nr; ++j) {
                        if (i == j) continue;
                        const double gk = g.at(i, j) * k.at(i, j);
                        if (gk == 0.0) continue;
                        double d2 = 0.0;
                        if (gphi != nullptr || gsig != nullptr) {
                            for (int c = 0; c < phi.cols(); ++c) {
                                const double d = phi.at(i, c) - phi.at(j, c);
                                d2 += d * d;
                                if (gphi != nullptr) {
                                    const double t = gk * d * inv_s2;
                                    gphi->at(i, c) -= t;
                                    gphi->at(j, c) += t;
                                }
                            }
                        }
                        sig_acc += gk * d2;
                    }
                }
                if (gsig != nullptr) (*gsig)[0] += sig_acc / (s * s * s);
                break;
            }
            case Op::ConvexMix: {
                const double gamma = node(n.a).value.item();
                const Tensor& xv = node(n.b).value;
                const Tensor& yv = node(n.c).value;
                if (Tensor* gc = grad_of(n.a)) {
                    double acc = 0.0;
                    for (int i = 0; i < g.size(); ++i) acc += g[i] * (yv[i] - xv[i]);
                    (*gc)[0] += acc;
                }
                if (Tensor* gx = grad_of(n.b))
                    for (int i = 0; i < g.size(); ++i) (*gx)[i] += (1.0 - gamma) * g[i];
                if (Tensor* gy = grad_of(n.c))
                    for (int i = 0; i < g.size(); ++i) (*gy)[i] += gamma * g[i];
                break;
            }
            case Op::SparsifyRows: {
                if (Tensor* gw = grad_of(n.a)) {
                    const Tensor& wv = node(n.a).value;
                    for (int i = 0; i < wv.rows(); ++i) {
                        double kept = 0.0;
                        for (int j = 0; j < wv.cols(); ++j)
                            if (wv.at(i, j) >= n.c0) kept += wv.at(i, j);
                        if (kept <= 0.0) continue;  // fallback row is locally constant
                        double dot = 0.0;
                        for (int j = 0; j < wv.cols(); ++j)
                            dot += g.at(i, j) * n.value.at(i, j);
                        for (int j = 0; j < wv.cols(); ++j)
                            if (wv.at(i, j) >= n.c0)
                                gw->at(i, j) += (g.at(i, j) - dot) / kept;
                    }
                }
                break;
            }
            case Op::PoolSum: {
                if (Tensor* gx = grad_of(n.a)) {
                    for (int i = 0; i < gx->rows(); ++i)
                        for (int j = 0; j < gx->cols(); ++j) gx->at(i, j) += g[j];
                }
                break;
            }
            case Op::PoolMean: {
                if (Tensor* gx = grad_of(n.a)) {
                    const double inv = 1.0 / gx->rows();
                    for (int i = 0; i < gx->rows(); ++i)
                        for (int j = 0; j < gx->cols(); ++j) gx->at(i, j) += g[j] * inv;
                }
                break;
            }
            case Op::PoolMax: {
                if (Tensor* gx = grad_of(n.a)) {
                    for (int j = 0; j < gx->cols(); ++j)
                        gx->at(n.arg_index[static_cast<size_t>(j)], j) += g[j];
                }
                break;
            }
            case Op::SumAll: {
                if (Tensor* gx = grad_of(n.a))
                    for (int i = 0; i < gx->size(); ++i) (*gx)[i] += g[0];
                break;
            }
            case Op::BinaryCrossEntropy: {
                if (Tensor* gp = grad_of(n.a)) {
                    const double p = std::clamp(node(n.a).value.item(), kProbClamp, 1.0 - kProbClamp);
                    (*gp)[0] += g[0] * (-n.c0 / p + (1.0 - n.c0) / (1.0 - p));
                }
                break;
            }
            case Op::PoissonNll: {
                if (Tensor* gl = grad_of(n.a)) {
                    const double lam = node(n.a).value.item();
                    (*gl)[0] += g[0] * (1.0 - n.c0 / lam);
                }
                break;
            }
        }
    }
}

Value matmul(Value a, Value b) { return a.tape->matmul(a, b); }
Value add(Value a, Value b) { return a.tape->add(a, b); }
Value subtract(Value a, Value b) { return a.tape->subtract(a, b); }
Value multiply(Value a, Value b) { return a.tape->multiply(a, b); }
Value scale(Value a, double c) { return a.tape->scale(a, c); }
Value add_row_bias(Value x, Value bias) { return x.tape->add_row_bias(x, bias); }
Value elementwise(Activation f, Value x) { return x.tape->elementwise(f, x); }
Value tanh(Value x) { return x.tape->elementwise(Activation::Tanh, x); }
Value relu(Value x) { return x.tape->elementwise(Activation::Relu, x); }
Value sigmoid(Value x) { return x.tape->elementwise(Activation::Sigmoid, x); }
Value exp(Value x) { return x.tape->elementwise(Activation::Exp, x); }
Value softplus(Value x) { return x.tape->elementwise(Activation::Softplus, x); }
Value softmax_rows(Value m) { return m.tape->softmax_rows(m); }
Value sum_all(Value x) { return x.tape->sum_all(x); }

}  // namespace dmps
