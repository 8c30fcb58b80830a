#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace histokit {

// Deterministic random source. Wraps mt19937_64 but maps draws to ranges
// itself, because std::uniform_*_distribution is not bit-stable across
// standard libraries and every pipeline stage must reproduce byte-identical
// output from its seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    bool coin_flip() { return (gen_() & 1u) != 0; }

    // Fisher-Yates sample of k distinct indices out of [0, n).
    std::vector<int> sample_indices(int n, int k);

    // In-place shuffle (Fisher-Yates, deterministic).
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<std::size_t>(i)],
                      v[static_cast<std::size_t>(uniform_int(0, i))]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Expands one root seed into independent per-stage seeds; stable across
// runs and platforms so that every CLI stage can be restarted in isolation.
std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage);

// Per-item sub-seed within a stage (e.g. per ensemble member, per slide).
std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage, std::uint64_t index);

}  // namespace histokit
