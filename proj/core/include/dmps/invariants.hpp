#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dmps/blocks.hpp"
#include "dmps/params.hpp"
#include "dmps/tensor.hpp"

namespace dmps {

struct InvariantResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct InvariantReport {
    std::vector<InvariantResult> checks;
    bool all_passed() const;
};

// Executes every module invariant with fixed seeds; individual failures are
// listed, never thrown. work_dir hosts the temporary artifacts of the
// harness-level checks.
InvariantReport run_invariant_suite(const std::filesystem::path& work_dir);

std::string report_to_json(const InvariantReport& report);
void write_report_json(const InvariantReport& report, const std::filesystem::path& path);

// Individual checks, reused by the acceptance suite.

bool check_row_stochastic(const Tensor& w, double tol, std::string* detail = nullptr);

// Independent stationary-distribution oracle: power iteration on W^T.
std::vector<double> stationary_distribution(const Tensor& w, int max_iters = 100000,
                                            double tol = 1e-13);

// Independently coded per-element MLP + pool + head (straight-line loops, no
// tape); the reduction target for a vanilla message-passing model with W = I.
Tensor deep_sets_reference(const Tensor& set_elements, const ParamStore& params,
                           const ModelConfig& cfg);

// Largest relative deviation |f(PX) - f(X)| / (|f(X)| + 1e-12) over random
// sets and permutations.
double max_invariance_deviation(const ModelConfig& cfg, int n_sets, int n_perms, uint64_t seed);

// Largest absolute deviation of B(PX; PWP^T) vs P B(X; W) over random
// instances, for one block kind.
double max_equivariance_deviation(BlockKind kind, int n_instances, uint64_t seed);

// Full-model finite-difference check; returns the worst relative error over
// all parameters.
double full_model_gradcheck(const ModelConfig& cfg, int n_sets, uint64_t seed);

// Largest deviation between the identity-graph model and the deep-sets
// reference over random sets.
double max_deep_sets_reduction_gap(int n_sets, uint64_t seed);

// Random row-stochastic / symmetric doubly stochastic test matrices.
Tensor random_row_stochastic(int n, SplitRng& rng, bool strictly_positive = true);
Tensor random_symmetric_doubly_stochastic(int n, SplitRng& rng);

}  // namespace dmps
