#include <doctest.h>

#include <algorithm>

#include "histokit/rmdl.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace histokit;
using rmdl::EnsembleSpec;
using rmdl::ModelFamily;

namespace {

EnsembleSpec small_spec() {
    EnsembleSpec spec;
    spec.n_members = 9;
    spec.mlp_count = spec.cnn_count = spec.rnn_count = 3;
    spec.seed = 5;
    spec.input_shape = {8, 8, 3};
    spec.classes = 3;
    spec.ranges.mlp_units_min = 4;
    spec.ranges.mlp_units_max = 8;
    spec.ranges.mlp_layers_max = 2;
    spec.ranges.cnn_filters_min = 2;
    spec.ranges.cnn_filters_max = 4;
    spec.ranges.cnn_blocks_max = 2;
    spec.ranges.rnn_units_min = 3;
    spec.ranges.rnn_units_max = 6;
    return spec;
}

// Two Gaussian-ish blobs per class along one axis; linearly separable.
train::Dataset toy_dataset(int per_class, int classes, std::uint64_t seed) {
    train::Dataset ds;
    Rng rng(seed);
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Tensor t({8, 8, 3});
            const float base = static_cast<float>(c) / static_cast<float>(classes);
            for (auto& v : t.data) {
                v = base + static_cast<float>(rng.uniform(0.0, 0.25 / classes));
            }
            ds.inputs.push_back(std::move(t));
            ds.labels.push_back(c);
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("sample_ensemble honors the family mix and seed") {
    const auto spec = small_spec();
    const auto members = rmdl::sample_ensemble(spec);
    REQUIRE(members.size() == 9);
    int mlp = 0, cnn = 0, rnn = 0;
    for (const auto& m : members) {
        if (m.family == ModelFamily::Mlp) ++mlp;
        if (m.family == ModelFamily::Cnn) ++cnn;
        if (m.family == ModelFamily::Rnn) ++rnn;
    }
    CHECK(mlp == 3);
    CHECK(cnn == 3);
    CHECK(rnn == 3);

    SUBCASE("optimizers alternate between the two kinds") {
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto expect = (i % 2 == 0) ? optim::OptimizerKind::Adam : optim::OptimizerKind::RmsProp;
            CHECK(members[i].optimizer.kind == expect);
        }
    }

    SUBCASE("same seed reproduces the identical spec list") {
        const auto again = rmdl::sample_ensemble(spec);
        for (std::size_t i = 0; i < members.size(); ++i) {
            CHECK(members[i].family == again[i].family);
            CHECK(members[i].init_seed == again[i].init_seed);
            CHECK(members[i].network.layers.size() == again[i].network.layers.size());
            for (std::size_t l = 0; l < members[i].network.layers.size(); ++l) {
                CHECK(members[i].network.layers[l].units == again[i].network.layers[l].units);
                CHECK(members[i].network.layers[l].filters == again[i].network.layers[l].filters);
            }
        }
    }

    SUBCASE("collapsed ranges make a family structurally identical") {
        auto collapsed = spec;
        collapsed.ranges.mlp_layers_min = collapsed.ranges.mlp_layers_max = 2;
        collapsed.ranges.mlp_units_min = collapsed.ranges.mlp_units_max = 6;
        const auto ms = rmdl::sample_ensemble(collapsed);
        for (int i = 0; i < collapsed.mlp_count; ++i) {
            CHECK(ms[static_cast<std::size_t>(i)].network.layers.size() == 4);  // flatten + 2 dense + softmax
            CHECK(ms[static_cast<std::size_t>(i)].network.layers[1].units == 6);
            CHECK(ms[static_cast<std::size_t>(i)].network.layers[2].units == 6);
        }
    }

    SUBCASE("invalid mixes are config errors") {
        auto bad = spec;
        bad.mlp_count = 5;  // 5 + 3 + 3 != 9
        CHECK_THROWS_AS(rmdl::sample_ensemble(bad), ConfigError);
        auto bad_range = spec;
        bad_range.ranges.rnn_units_min = 9;
        bad_range.ranges.rnn_units_max = 3;
        CHECK_THROWS_AS(rmdl::sample_ensemble(bad_range), ConfigError);
    }
}

TEST_CASE("majority_vote") {
    SUBCASE("binary closed form on the published example") {
        CHECK(rmdl::majority_vote({1, 1, 0}, {}) == 1);
        CHECK(oracles::binary_vote_closed_form({1, 1, 0}) == 1);
    }
    SUBCASE("unanimity") { CHECK(rmdl::majority_vote({2, 2, 2, 2}, {}) == 2); }
    SUBCASE("empty votes are rejected") {
        CHECK_THROWS_AS(rmdl::majority_vote({}, {}), DomainError);
    }
    SUBCASE("three-way tie broken by summed probability") {
        const std::vector<int> votes{0, 1, 2};
        const std::vector<std::vector<float>> probs{
            {0.4f, 0.3f, 0.3f}, {0.2f, 0.5f, 0.3f}, {0.1f, 0.1f, 0.8f}};
        // Sums: 0.7, 0.9, 1.4 -> class 2.
        CHECK(rmdl::majority_vote(votes, probs) == 2);
    }
    SUBCASE("tie with equal sums falls to the lowest index") {
        const std::vector<int> votes{0, 1};
        const std::vector<std::vector<float>> probs{{0.5f, 0.5f}, {0.5f, 0.5f}};
        CHECK(rmdl::majority_vote(votes, probs) == 0);
    }
    SUBCASE("matches the closed form for all odd binary vectors up to n=9") {
        for (const int n : {1, 3, 5, 7, 9}) {
            for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
                std::vector<int> votes;
                for (int i = 0; i < n; ++i) votes.push_back((mask >> i) & 1u ? 1 : 0);
                CHECK(rmdl::majority_vote(votes, {}) == oracles::binary_vote_closed_form(votes));
            }
        }
    }
    SUBCASE("matches exhaustive counting for n<=5, K<=3") {
        Rng rng(51);
        std::vector<int> votes(5);
        for (int n = 1; n <= 5; ++n) {
            std::vector<std::vector<float>> probs(static_cast<std::size_t>(n));
            long long total = 1;
            for (int i = 0; i < n; ++i) total *= 3;
            for (long long code = 0; code < total; ++code) {
                long long rest = code;
                for (int i = 0; i < n; ++i) {
                    votes[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3);
                    rest /= 3;
                }
                for (int i = 0; i < n; ++i) {
                    float a = static_cast<float>(rng.uniform(0.01, 1.0));
                    float b = static_cast<float>(rng.uniform(0.01, 1.0));
                    float c = static_cast<float>(rng.uniform(0.01, 1.0));
                    const float s = a + b + c;
                    probs[static_cast<std::size_t>(i)] = {a / s, b / s, c / s};
                }
                const std::vector<int> v(votes.begin(), votes.begin() + n);
                CHECK(rmdl::majority_vote(v, probs) == oracles::vote_count_oracle(v, probs, 3));
            }
        }
    }
}

TEST_CASE("predict_member ties go to the lowest class") {
    nn::NetworkSpec net;
    net.input_shape = {2};
    net.layers = {nn::LayerSpec::softmax_output(3)};
    auto params = nn::init_parameters(net, 1);
    testutil::zero_params(params);  // uniform output
    const auto [label, probs] = rmdl::predict_member(net, params, Tensor::from({2}, {1.0f, -1.0f}));
    CHECK(label == 0);
    for (const float p : probs) CHECK(p == doctest::Approx(1.0f / 3.0f));
}

TEST_CASE("hand-set logistic member matches manual evaluation") {
    nn::NetworkSpec net;
    net.input_shape = {2};
    net.layers = {nn::LayerSpec::softmax_output(2)};
    auto params = nn::init_parameters(net, 1);
    params.layers[0].tensors[0] = Tensor::from({2, 2}, {2.0f, -2.0f, 0.0f, 0.0f});
    params.layers[0].tensors[1] = Tensor::from({2}, {0.0f, 0.0f});
    // logits = (2x0, -2x0); for x0 = 1: (2, -2) -> class 0.
    const auto [label, probs] = rmdl::predict_member(net, params, Tensor::from({2}, {1.0f, 5.0f}));
    CHECK(label == 0);
    const double e2 = std::exp(2.0), em2 = std::exp(-2.0);
    CHECK(probs[0] == doctest::Approx(e2 / (e2 + em2)).epsilon(1e-5));
}

TEST_CASE("train_ensemble basics") {
    auto spec = small_spec();
    spec.n_members = 3;
    spec.mlp_count = 3;
    spec.cnn_count = spec.rnn_count = 0;
    const auto members = rmdl::sample_ensemble(spec);
    const auto dataset = toy_dataset(6, 3, 77);

    SUBCASE("training twice with identical seeds gives identical vote matrices") {
        const auto a = rmdl::train_ensemble(members, dataset, 3);
        const auto b = rmdl::train_ensemble(members, dataset, 3);
        const auto va = rmdl::collect_votes(a, dataset.inputs);
        const auto vb = rmdl::collect_votes(b, dataset.inputs);
        CHECK(va.labels == vb.labels);
        CHECK(va.probs == vb.probs);
        CHECK(va.n_members == 3);
        CHECK(va.classes == 3);
    }

    SUBCASE("most members master a separable toy set") {
        const auto trained = rmdl::train_ensemble(members, dataset, 200);
        int perfect = 0;
        for (const auto& m : trained.members) {
            if (train::evaluate_accuracy(m.spec.network, m.params, dataset) == 1.0) ++perfect;
        }
        CHECK(perfect >= 2);  // n - 1 of 3
    }

    SUBCASE("per-member curves are recorded") {
        const auto trained = rmdl::train_ensemble(members, dataset, 4);
        for (const auto& m : trained.members) {
            REQUIRE(m.history.curve.size() == 4);
            CHECK(m.history.curve.front().epoch == 1);
            CHECK(m.history.curve.back().epoch == 4);
        }
    }
}

TEST_CASE("single-member ensemble reduces to that model") {
    auto spec = small_spec();
    spec.n_members = 1;
    spec.mlp_count = 1;
    spec.cnn_count = spec.rnn_count = 0;
    const auto members = rmdl::sample_ensemble(spec);
    const auto dataset = toy_dataset(4, 3, 13);
    const auto trained = rmdl::train_ensemble(members, dataset, 5);
    for (const auto& x : dataset.inputs) {
        const auto [label, probs] =
            rmdl::predict_member(trained.members[0].spec.network, trained.members[0].params, x);
        (void)probs;
        CHECK(rmdl::ensemble_predict(trained, x) == label);
    }
}

TEST_CASE("ensemble_predict is invariant to member order") {
    auto spec = small_spec();
    spec.n_members = 3;
    spec.mlp_count = 3;
    spec.cnn_count = spec.rnn_count = 0;
    const auto dataset = toy_dataset(4, 3, 99);
    auto trained = rmdl::train_ensemble(rmdl::sample_ensemble(spec), dataset, 5);

    auto permuted = trained;
    std::rotate(permuted.members.begin(), permuted.members.begin() + 1, permuted.members.end());
    for (const auto& x : dataset.inputs) {
        CHECK(rmdl::ensemble_predict(trained, x) == rmdl::ensemble_predict(permuted, x));
    }
}
