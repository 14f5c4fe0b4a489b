#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmps/config.hpp"
#include "dmps/kernel.hpp"
#include "dmps/metrics.hpp"
#include "dmps/params.hpp"
#include "dmps/tasks.hpp"

namespace dmps {

struct TrainResult {
    ParamStore params;
    std::vector<MetricsRecord> metrics;
    double final_accuracy = 0.0;
    double final_loss = 0.0;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> predictions;  // model outputs per set
    std::vector<double> labels;
};

// Deterministic stream tags; every consumer derives its own substream from
// the run seed, so draws never depend on iteration order.
namespace streams {
inline constexpr uint64_t kInit = 100;
inline constexpr uint64_t kTrain = 200;
inline constexpr uint64_t kEval = 300;
inline constexpr uint64_t kExportSigma = 400;
inline constexpr uint64_t kExportIdentity = 401;
}  // namespace streams

// Generates the i-th set of training batch b (balanced halves for the
// gaussian task).
SetInstance training_set(const RunConfig& cfg, const GaussianSetSampler* sigma_sampler,
                         const GaussianSetSampler* identity_sampler, uint64_t batch, int index,
                         const SplitRng& train_rng);

// Runs the batch loop with Adam and the plateau scheduler; writes
// metrics.jsonl, checkpoint.bin and the resolved config into cfg.out_dir
// (unless write_outputs is false). Throws NumericalError naming the batch if
// the loss goes non-finite.
TrainResult train(const RunConfig& cfg, bool write_outputs = true, bool quiet = false);

// Accuracy over freshly sampled evaluation sets: sigmoid threshold 0.5 for
// gaussian labels, round(lambda) for counting labels.
EvalResult evaluate(ParamStore& params, const RunConfig& cfg, int n_sets, uint64_t stream_tag);

struct SweepRow {
    double grid_value = 0.0;
    std::vector<double> per_seed_accuracy;
    double mean = 0.0;
    double sd = 0.0;
};

struct SweepTable {
    std::string grid_name;  // "rho" or "gamma"
    std::vector<uint64_t> seeds;
    std::vector<SweepRow> rows;
};

std::string sweep_table_csv(const SweepTable& table);

// Trains one model per (grid value, seed); grid points run as independent
// jobs, optionally in parallel. Writes results.csv into cfg.out_dir.
SweepTable sweep_rho(const RunConfig& cfg, const std::vector<double>& grid,
                     const std::vector<uint64_t>& seeds, int parallel_jobs = 1,
                     bool write_outputs = true);
SweepTable sweep_gamma(const RunConfig& cfg, const std::vector<double>& grid,
                       const std::vector<uint64_t>& seeds, int parallel_jobs = 1,
                       bool write_outputs = true);

// Latent graph of one input set under the full model (encoder included).
LatentGraph model_latent_graph(const Tensor& set_elements, ParamStore& params,
                               const ModelConfig& cfg);

struct KernelExportSummary {
    int argmax_row = 0;  // 1-based indices of the largest mean off-diagonal
    int argmax_col = 0;
    double argmax_value = 0.0;
    double rest_mean = 0.0;     // statistics of the remaining off-diagonals
    double rest_sd = 0.0;
    bool identity_flat = false;  // no identity-set off-diagonal above mean+4sd
};

// Writes per-set K/W CSVs, the class-mean kernel matrices and a JSON summary
// naming the dominant off-diagonal entry.
KernelExportSummary export_kernel(ParamStore& params, const RunConfig& cfg,
                                  const std::filesystem::path& out_dir, int mean_sets = 2000,
                                  int per_set_exports = 8);

}  // namespace dmps
