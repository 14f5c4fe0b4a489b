#include "dmps/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "dmps/errors.hpp"

namespace dmps {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'P', 'S', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ConfigError("truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const ParamStore& params, uint64_t config_hash,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(out, kCheckpointVersion);
    write_pod<uint64_t>(out, config_hash);
    write_pod<uint32_t>(out, static_cast<uint32_t>(params.count()));
    for (const auto& name : params.names()) {
        const Tensor& t = params.value(name);
        write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint32_t>(out, static_cast<uint32_t>(t.rows()));
        write_pod<uint32_t>(out, static_cast<uint32_t>(t.cols()));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(sizeof(double) * t.size()));
    }
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError(path.string() + " is not a checkpoint file");
    Checkpoint ckpt;
    ckpt.version = read_pod<uint32_t>(in);
    if (ckpt.version != kCheckpointVersion)
        throw ConfigError("unsupported checkpoint version " + std::to_string(ckpt.version));
    ckpt.config_hash = read_pod<uint64_t>(in);
    const uint32_t count = read_pod<uint32_t>(in);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_pod<uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const uint32_t rows = read_pod<uint32_t>(in);
        const uint32_t cols = read_pod<uint32_t>(in);
        Tensor& t = ckpt.params.create(name, static_cast<int>(rows), static_cast<int>(cols));
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(double) * t.size()));
        if (!in) throw ConfigError("truncated checkpoint " + path.string());
    }
    return ckpt;
}

}  // namespace dmps
