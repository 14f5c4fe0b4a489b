#pragma once

#include <iosfwd>
#include <vector>

#include "dmps/tensor.hpp"

namespace dmps {

// Undirected weighted graph for the energy bookkeeping: symmetric nonnegative
// weights, edges not double-counted, zero diagonal allowed.
struct WeightedGraph {
    Tensor weights;
    double c = 1.0;

    int n() const { return weights.rows(); }
    void validate() const;
};

struct DiffusionTrace {
    std::vector<Tensor> states;       // X^0 ... X^T
    std::vector<double> energies;     // one per state
    std::vector<double> oscillation;  // one per state
    double step_scale = 1.0;          // s = dt * C
    bool converged = false;

    int steps() const { return static_cast<int>(states.size()) - 1; }
};

// E = (C/2) sum over unordered pairs of w_ij |x_i - x_j|^2.
double dirichlet_energy(const Tensor& x, const WeightedGraph& graph);

// X' = (1-s) X + s W X for s in (0,1]; s = 1 is exactly the message passing
// step.
Tensor diffusion_step(const Tensor& x, const Tensor& weights, double step_scale);

// Iterates diffusion_step until the largest pairwise row distance drops below
// tol or max_steps is hit; non-convergence is flagged on the trace, not
// thrown. Energies are measured on the symmetrized graph of W.
DiffusionTrace simulate_to_steady_state(const Tensor& x0, const Tensor& weights,
                                        double step_scale, double tol = 1e-8,
                                        int max_steps = 10000);

// Largest per-coordinate spread across rows.
double oscillation_index(const Tensor& x);

// w = (W + W^T)/2 with zeroed diagonal, C = 1; energy-test companion for
// row-softmax W, which is generally not symmetric.
WeightedGraph symmetrize_for_energy_test(const Tensor& weights);

// CSV trace export: step,energy,oscillation.
void write_trace_csv(const DiffusionTrace& trace, std::ostream& out);

}  // namespace dmps
