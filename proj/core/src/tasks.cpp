#include "dmps/tasks.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dmps/errors.hpp"
#include "dmps/io.hpp"

namespace dmps {

using nlohmann::json;

Tensor build_covariance(double rho) {
    if (!(rho >= 0.0 && rho < 1.0))
        throw ConfigError("correlation must lie in [0, 1), got " + std::to_string(rho));
    Tensor sigma(5, 5);
    for (int i = 0; i < 5; ++i) sigma.at(i, i) = 1.0;
    sigma.at(1, 3) = rho;  // pair (2,4) in 1-based indexing
    sigma.at(3, 1) = rho;
    return sigma;
}

Tensor cholesky_lower(const Tensor& m) {
    if (m.rows() != m.cols()) throw DimensionError("cholesky needs a square matrix");
    const int n = m.rows();
    Tensor l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m.at(i, j);
            for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (!(s > 0.0))
                    throw ConfigError("matrix is not positive definite (pivot " +
                                      std::to_string(i) + ")");
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return l;
}

GaussianSetSampler::GaussianSetSampler(const Tensor& covariance)
    : chol_(cholesky_lower(covariance)) {}

Tensor GaussianSetSampler::sample(SplitRng& rng) const {
    const int p = chol_.rows();
    std::vector<double> z(static_cast<size_t>(p));
    for (double& v : z) v = rng.normal();
    // Elements are the coordinates of one draw, in canonical order.
    Tensor x(p, 1);
    for (int i = 0; i < p; ++i) {
        double s = 0.0;
        for (int k = 0; k <= i; ++k) s += chol_.at(i, k) * z[static_cast<size_t>(k)];
        x.at(i, 0) = s;
    }
    return x;
}

Tensor sample_gaussian_set(const Tensor& covariance, SplitRng& rng) {
    return GaussianSetSampler(covariance).sample(rng);
}

CountingSample sample_counting_set(const CountingTaskSpec& spec, SplitRng& rng) {
    if (spec.n_min < 1 || spec.n_max < spec.n_min)
        throw ConfigError("invalid counting set-size range");
    const int n = rng.uniform_int(spec.n_min, spec.n_max);
    const int c = rng.uniform_int(1, n);

    // Rejection-sample centers pairwise at least min_separation apart.
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<size_t>(c));
    int stale = 0;
    while (static_cast<int>(centers.size()) < c) {
        std::vector<double> p(static_cast<size_t>(spec.element_dim));
        for (double& v : p) v = rng.uniform(spec.center_low, spec.center_high);
        bool ok = true;
        for (const auto& q : centers) {
            double d2 = 0.0;
            for (size_t k = 0; k < p.size(); ++k) d2 += (p[k] - q[k]) * (p[k] - q[k]);
            if (d2 < spec.min_separation * spec.min_separation) {
                ok = false;
                break;
            }
        }
        if (ok) {
            centers.push_back(std::move(p));
            stale = 0;
        } else if (++stale > 1000) {
            // Dead-end packing; restart the whole configuration.
            centers.clear();
            stale = 0;
        }
    }

    // Every cluster appears once; remaining elements are allocated uniformly.
    std::vector<int> alloc(static_cast<size_t>(c), 1);
    for (int extra = 0; extra < n - c; ++extra)
        alloc[static_cast<size_t>(rng.uniform_int(0, c - 1))] += 1;

    CountingSample sample;
    sample.count = c;
    sample.elements = Tensor(n, spec.element_dim);
    int row = 0;
    for (int k = 0; k < c; ++k) {
        for (int r = 0; r < alloc[static_cast<size_t>(k)]; ++r) {
            for (int d = 0; d < spec.element_dim; ++d)
                sample.elements.at(row, d) =
                    centers[static_cast<size_t>(k)][static_cast<size_t>(d)] +
                    spec.noise_scale * rng.normal();
            ++row;
        }
    }
    return sample;
}

double poisson_nll(double lambda, int x) {
    if (x < 0) throw DimensionError("poisson_nll count must be nonnegative");
    if (!(lambda > 0.0)) throw NumericalError("poisson_nll rate must be positive");
    const double log_term = x > 0 ? x * std::log(lambda) : 0.0;
    return lambda - log_term + std::lgamma(x + 1.0);
}

double binary_ce(double p, int y) {
    if (!(p > 0.0 && p < 1.0)) throw NumericalError("binary_ce probability must be interior");
    return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

void write_set_batch_jsonl(const SetBatch& batch, const std::string& task,
                           const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    for (const auto& set : batch) {
        json elements = json::array();
        for (int i = 0; i < set.elements.rows(); ++i) {
            json row = json::array();
            for (int j = 0; j < set.elements.cols(); ++j) row.push_back(set.elements.at(i, j));
            elements.push_back(std::move(row));
        }
        json line;
        line["task"] = task;
        line["label"] = set.label;
        line["elements"] = std::move(elements);
        out << line.dump() << '\n';
    }
}

SetBatch read_set_batch_jsonl(const std::filesystem::path& path, std::string* task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    SetBatch batch;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (task != nullptr) *task = j.at("task").get<std::string>();
        const auto& elements = j.at("elements");
        const int rows = static_cast<int>(elements.size());
        const int cols = rows > 0 ? static_cast<int>(elements[0].size()) : 0;
        SetInstance set;
        set.elements = Tensor(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j2 = 0; j2 < cols; ++j2)
                set.elements.at(i, j2) = elements[static_cast<size_t>(i)][static_cast<size_t>(j2)]
                                             .get<double>();
        set.label = j.at("label").get<double>();
        batch.push_back(std::move(set));
    }
    return batch;
}

}  // namespace dmps
