#include "dmps/metrics.hpp"

#include <sstream>

#include "dmps/io.hpp"

namespace dmps {

std::string metrics_to_jsonl(const std::vector<MetricsRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        out << "{\"step\":" << r.step << ",\"train_loss\":" << format_double(r.train_loss)
            << ",\"eval_accuracy\":";
        if (r.eval_accuracy)
            out << format_double(*r.eval_accuracy);
        else
            out << "null";
        out << ",\"learning_rate\":" << format_double(r.learning_rate) << ",\"gamma\":";
        if (r.gamma)
            out << format_double(*r.gamma);
        else
            out << "null";
        out << "}\n";
    }
    return out.str();
}

void write_metrics_jsonl(const std::vector<MetricsRecord>& records,
                         const std::filesystem::path& path) {
    write_text_file(path, metrics_to_jsonl(records));
}

}  // namespace dmps
