#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dmps/tensor.hpp"

namespace dmps {

// Shortest round-trip decimal representation (%.17g); identical doubles
// always format to identical bytes.
std::string format_double(double v);

// Row-major CSV, full precision scientific notation, no header.
void write_matrix_csv(const Tensor& m, const std::filesystem::path& path);
Tensor read_matrix_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dmps
