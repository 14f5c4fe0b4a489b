#pragma once

#include <string>
#include <vector>

#include "dmps/params.hpp"
#include "dmps/tensor.hpp"

namespace dmps {

enum class Activation { Identity, Tanh, Relu, Sigmoid, Exp, Softplus };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
double apply_activation(Activation a, double x);

class Tape;

// Handle to a node on a computation record.
struct Value {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run computation record: an ordered list of operations whose
// inputs always precede them, replayed in reverse by backward(). Rebuilt per
// forward pass; parameters accumulate gradients into their ParamStore.
class Tape {
public:
    enum class Op {
        Leaf,
        Param,
        Matmul,
        Add,
        Subtract,
        Multiply,       // elementwise
        ScaleConst,
        AddRowBias,     // X (n x p) + broadcast bias (1 x p)
        Elementwise,    // activation per c0
        SoftmaxRows,
        RbfKernel,      // inputs: features (n x d), bandwidth (1 x 1)
        ConvexMix,      // inputs: coefficient (1 x 1), x, y -> (1-g) x + g y
        SparsifyRows,   // threshold c0, zero-then-renormalize, self-weight fallback
        PoolSum,
        PoolMean,
        PoolMax,
        SumAll,
        BinaryCrossEntropy,  // input prob (1 x 1), label c0
        PoissonNll,          // input rate (1 x 1), count c0
    };

    Value input(Tensor x);
    Value constant(double v);
    Value param(ParamStore& store, const std::string& name);

    Value matmul(Value a, Value b);
    Value add(Value a, Value b);
    Value subtract(Value a, Value b);
    Value multiply(Value a, Value b);
    Value scale(Value a, double c);
    Value add_row_bias(Value x, Value bias);
    Value elementwise(Activation f, Value x);
    Value softmax_rows(Value m);
    Value rbf_kernel(Value features, Value bandwidth);
    Value convex_mix(Value coeff, Value x, Value y);
    Value sparsify_rows(Value w, double threshold);
    Value pool_sum(Value x);
    Value pool_mean(Value x);
    Value pool_max(Value x);
    Value sum_all(Value x);
    Value binary_cross_entropy(Value prob, double label);
    Value poisson_nll(Value rate, int count);

    // Reverse replay from a scalar loss; fills node gradients and accumulates
    // parameter gradients into their stores.
    void backward(Value loss);

    const Tensor& value(Value v) const { return node(v.id).value; }
    const Tensor& grad(Value v) const { return node(v.id).grad; }
    size_t size() const { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        Tensor value;
        Tensor grad;
        double c0 = 0.0;
        std::vector<int> arg_index;   // PoolMax argmax rows per column
        ParamStore* store = nullptr;  // Param nodes only
        std::string pname;
        bool requires_grad = false;
    };

    const Node& node(int id) const;
    Node& node(int id);
    Value push(Node n);
    void check_same_tape(Value a, Value b) const;

    std::vector<Node> nodes_;
};

// Convenience wrappers so expressions read naturally at call sites.
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value subtract(Value a, Value b);
Value multiply(Value a, Value b);
Value scale(Value a, double c);
Value add_row_bias(Value x, Value bias);
Value elementwise(Activation f, Value x);
Value tanh(Value x);
Value relu(Value x);
Value sigmoid(Value x);
Value exp(Value x);
Value softplus(Value x);
Value softmax_rows(Value m);
Value sum_all(Value x);

}  // namespace dmps
