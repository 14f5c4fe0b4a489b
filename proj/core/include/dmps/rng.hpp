#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dmps {

// Splittable counter-seeded generator: xoshiro256++ streams derived from a
// root seed by key mixing, so per-set streams are reproducible independently
// of iteration order. All distributions are implemented here rather than via
// <random> to keep byte-level determinism across standard libraries.
class SplitRng {
public:
    explicit SplitRng(uint64_t seed);

    // Derives an independent stream; does not advance this generator.
    SplitRng split(uint64_t key) const;
    SplitRng split(uint64_t key1, uint64_t key2) const;

    uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    int uniform_int(int lo, int hi);        // inclusive on both ends
    double normal();                        // standard normal (Box-Muller)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
            std::swap(v[i], v[uniform_int(0, i)]);
    }

    std::vector<int> permutation(int n);

private:
    uint64_t stream_id_ = 0;
    std::array<uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dmps
