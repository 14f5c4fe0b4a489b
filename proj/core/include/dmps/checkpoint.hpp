#pragma once

#include <cstdint>
#include <filesystem>

#include "dmps/params.hpp"

namespace dmps {

// Versioned binary container of named tensors. Little-endian doubles;
// portability across machines with identical endianness is sufficient.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore& params, uint64_t config_hash,
                     const std::filesystem::path& path);

struct Checkpoint {
    ParamStore params;
    uint64_t config_hash = 0;
    uint32_t version = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmps
