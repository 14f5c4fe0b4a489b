#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmps/blocks.hpp"
#include "dmps/tasks.hpp"

namespace dmps {

struct OptimConfig {
    double learning_rate = 1e-3;
    bool scheduler = true;
    double scheduler_factor = 0.9;
    int scheduler_patience = 1;
    int scheduler_interval = 100;  // batches per monitored loss window
};

// Everything one run needs; defaults reproduce the reference training
// protocols scaled to a desk budget. All fields are overridable from the
// config file and CLI.
struct RunConfig {
    std::string task = "gaussian";  // gaussian | counting
    ModelConfig model;
    OptimConfig optim;
    int batches = 10000;
    int batch_size = 128;
    uint64_t seed = 1;
    std::string out_dir = "out";
    double rho = 0.95;
    CountingTaskSpec counting;
    int eval_sets = 2000;
    int log_interval = 100;
    int eval_interval = 1000;  // 0 disables in-training evaluation
    std::vector<double> rho_grid{0.0, 0.25, 0.5, 0.75, 0.95};
    std::vector<double> gamma_grid{0.02, 0.3, 0.5, 0.7, 0.98};
    std::vector<uint64_t> sweep_seeds{1, 2, 3};

    void validate() const;
};

RunConfig default_config(const std::string& task);

RunConfig parse_config_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg, bool annotated = false);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// FNV-1a over the canonical serialized form; checkpoints carry it so a model
// is never evaluated under a mismatched architecture.
uint64_t config_hash(const RunConfig& cfg);

}  // namespace dmps
