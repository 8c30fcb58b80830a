#include <doctest.h>

#include "histokit/rng.hpp"
#include "histokit/tensor.hpp"

using namespace histokit;

TEST_CASE("tensor shape/data agreement") {
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    t(1, 2, 3) = 5.0f;
    CHECK(t.data[23] == 5.0f);
    CHECK_THROWS_AS(Tensor({2, 0, 4}), DimensionError);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0f}), DimensionError);
}

TEST_CASE("row-major indexing") {
    Tensor t({2, 3});
    int k = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) t(i, j) = static_cast<float>(k++);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.data[i] == static_cast<float>(i));
}

TEST_CASE("tensor_cast preserves values") {
    const Tensor t = Tensor::from({3}, {1.5f, -2.0f, 0.25f});
    const Tensor64 d = tensor_cast<double>(t);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(d.data[i] == static_cast<double>(t.data[i]));
}

TEST_CASE("rng determinism and stage seeds") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(stage_seed(1, "patch") == stage_seed(1, "patch"));
    CHECK(stage_seed(1, "patch") != stage_seed(1, "filter"));
    CHECK(stage_seed(1, "member", 0) != stage_seed(1, "member", 1));

    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const int k = r.uniform_int(3, 9);
        CHECK(k >= 3);
        CHECK(k <= 9);
    }
}

TEST_CASE("sample_indices draws distinct indices") {
    Rng r(3);
    const auto idx = r.sample_indices(10, 4);
    CHECK(idx.size() == 4);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = i + 1; j < idx.size(); ++j) CHECK(idx[i] != idx[j]);
    }
}
