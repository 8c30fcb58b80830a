#include "histokit/rng.hpp"

namespace histokit {

std::vector<int> Rng::sample_indices(int n, int k) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        const int j = uniform_int(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage) {
    return splitmix64(root_seed ^ fnv1a(stage));
}

std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage, std::uint64_t index) {
    return splitmix64(stage_seed(root_seed, stage) + 0x632be59bd9b4e019ull * (index + 1));
}

}  // namespace histokit
