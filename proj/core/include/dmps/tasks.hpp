#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dmps/rng.hpp"
#include "dmps/tensor.hpp"

namespace dmps {

// One input set: n x p element matrix plus its label (class or count).
struct SetInstance {
    Tensor elements;
    double label = 0.0;
};

using SetBatch = std::vector<SetInstance>;

// Gaussian-set classification: sets are the coordinates of one draw from
// either N(0, I) or N(0, Sigma(rho)), where Sigma is the identity except for
// a single correlated pair.
struct GaussianTaskSpec {
    int dim = 5;
    double rho = 0.95;
    std::pair<int, int> correlated_pair{2, 4};  // 1-based
    int batch_size = 128;
};

// Identity except Sigma_{2,4} = Sigma_{4,2} = rho (1-based pair).
Tensor build_covariance(double rho);

// Lower Cholesky factor; throws ConfigError if the matrix is not positive
// definite.
Tensor cholesky_lower(const Tensor& m);

// Draw z ~ N(0, I), return L z as a column of scalar set elements in
// canonical coordinate order.
Tensor sample_gaussian_set(const Tensor& covariance, SplitRng& rng);

// Caches the Cholesky factor for repeated sampling.
class GaussianSetSampler {
public:
    explicit GaussianSetSampler(const Tensor& covariance);
    Tensor sample(SplitRng& rng) const;
    int dim() const { return chol_.rows(); }

private:
    Tensor chol_;
};

// Synthetic cluster-counting: n in [n_min, n_max] planar points drawn around
// c distinct cluster centers, every chosen cluster represented at least once;
// the label is c.
struct CountingTaskSpec {
    int n_min = 6;
    int n_max = 10;
    int element_dim = 2;
    double center_low = -1.0;
    double center_high = 1.0;
    double min_separation = 0.5;
    double noise_scale = 0.1;
};

struct CountingSample {
    Tensor elements;
    int count = 0;
};

CountingSample sample_counting_set(const CountingTaskSpec& spec, SplitRng& rng);

// Negative Poisson log-likelihood -log p(x | lambda).
double poisson_nll(double lambda, int x);

// Binary cross-entropy -[y log p + (1-y) log(1-p)].
double binary_ce(double p, int y);

// Newline-delimited JSON dataset dump/load (one set per line: elements,
// label, task id).
void write_set_batch_jsonl(const SetBatch& batch, const std::string& task,
                           const std::filesystem::path& path);
SetBatch read_set_batch_jsonl(const std::filesystem::path& path, std::string* task = nullptr);

}  // namespace dmps
