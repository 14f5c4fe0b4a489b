#include "dmps/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dmps/errors.hpp"
#include "dmps/io.hpp"

namespace dmps {

void WeightedGraph::validate() const {
    if (weights.rows() != weights.cols())
        throw DimensionError("weighted graph needs a square weight matrix");
    for (int i = 0; i < weights.rows(); ++i)
        for (int j = 0; j < weights.cols(); ++j) {
            if (weights.at(i, j) < 0.0) throw DimensionError("edge weights must be nonnegative");
            if (weights.at(i, j) != weights.at(j, i))
                throw DimensionError("edge weights must be symmetric");
        }
    if (!(c > 0.0)) throw ConfigError("energy constant must be positive");
}

double dirichlet_energy(const Tensor& x, const WeightedGraph& graph) {
    if (x.rows() != graph.n())
        throw DimensionError("feature rows must match the node count");
    double e = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
        for (int j = i + 1; j < x.rows(); ++j) {
            double d2 = 0.0;
            for (int k = 0; k < x.cols(); ++k) {
                const double d = x.at(i, k) - x.at(j, k);
                d2 += d * d;
            }
            e += graph.weights.at(i, j) * d2;
        }
    }
    return 0.5 * graph.c * e;
}

Tensor diffusion_step(const Tensor& x, const Tensor& weights, double step_scale) {
    if (!(step_scale > 0.0 && step_scale <= 1.0))
        throw ConfigError("diffusion step scale must lie in (0, 1]");
    if (weights.rows() != weights.cols() || weights.rows() != x.rows())
        throw DimensionError("weight matrix must be square and match the feature rows");
    // s = 1 must recover the message passing step bit for bit.
    if (step_scale == 1.0) return matmul(weights, x);
    Tensor mixed = matmul(weights, x);
    for (int i = 0; i < mixed.size(); ++i)
        mixed[i] = (1.0 - step_scale) * x[i] + step_scale * mixed[i];
    return mixed;
}

double oscillation_index(const Tensor& x) {
    if (x.rows() < 1) throw DimensionError("oscillation index of an empty tensor");
    double widest = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
        double lo = x.at(0, j), hi = x.at(0, j);
        for (int i = 1; i < x.rows(); ++i) {
            lo = std::min(lo, x.at(i, j));
            hi = std::max(hi, x.at(i, j));
        }
        widest = std::max(widest, hi - lo);
    }
    return widest;
}

WeightedGraph symmetrize_for_energy_test(const Tensor& weights) {
    if (weights.rows() != weights.cols())
        throw DimensionError("symmetrize needs a square matrix");
    WeightedGraph g;
    g.weights = Tensor(weights.rows(), weights.cols());
    g.c = 1.0;
    for (int i = 0; i < weights.rows(); ++i)
        for (int j = 0; j < weights.cols(); ++j)
            g.weights.at(i, j) = i == j ? 0.0 : 0.5 * (weights.at(i, j) + weights.at(j, i));
    return g;
}

namespace {
double max_pairwise_row_distance(const Tensor& x) {
    double worst = 0.0;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = i + 1; j < x.rows(); ++j) {
            double d2 = 0.0;
            for (int k = 0; k < x.cols(); ++k) {
                const double d = x.at(i, k) - x.at(j, k);
                d2 += d * d;
            }
            worst = std::max(worst, std::sqrt(d2));
        }
    return worst;
}
}  // namespace

DiffusionTrace simulate_to_steady_state(const Tensor& x0, const Tensor& weights,
                                        double step_scale, double tol, int max_steps) {
    if (max_steps < 0) throw ConfigError("max_steps must be nonnegative");
    WeightedGraph energy_graph = symmetrize_for_energy_test(weights);
    DiffusionTrace trace;
    trace.step_scale = step_scale;
    trace.states.push_back(x0);
    trace.energies.push_back(dirichlet_energy(x0, energy_graph));
    trace.oscillation.push_back(oscillation_index(x0));
    for (int t = 0; t < max_steps; ++t) {
        if (max_pairwise_row_distance(trace.states.back()) < tol) {
            trace.converged = true;
            break;
        }
        Tensor next = diffusion_step(trace.states.back(), weights, step_scale);
        trace.states.push_back(std::move(next));
        trace.energies.push_back(dirichlet_energy(trace.states.back(), energy_graph));
        trace.oscillation.push_back(oscillation_index(trace.states.back()));
    }
    if (!trace.converged)
        trace.converged = max_pairwise_row_distance(trace.states.back()) < tol;
    return trace;
}

void write_trace_csv(const DiffusionTrace& trace, std::ostream& out) {
    out << "step,energy,oscillation\n";
    for (size_t t = 0; t < trace.states.size(); ++t)
        out << t << ',' << format_double(trace.energies[t]) << ','
            << format_double(trace.oscillation[t]) << '\n';
}

}  // namespace dmps
