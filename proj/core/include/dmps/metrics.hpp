#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dmps {

struct MetricsRecord {
    int step = 0;
    double train_loss = 0.0;
    std::optional<double> eval_accuracy;
    double learning_rate = 0.0;
    std::optional<double> gamma;
    double wall_clock_s = 0.0;  // kept in memory and progress output only;
                                // excluded from the file so identical runs
                                // stay byte-identical
};

// One JSON object per record, fixed key order.
std::string metrics_to_jsonl(const std::vector<MetricsRecord>& records);
void write_metrics_jsonl(const std::vector<MetricsRecord>& records,
                         const std::filesystem::path& path);

}  // namespace dmps
