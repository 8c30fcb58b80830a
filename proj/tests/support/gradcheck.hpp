#pragma once

// 64-bit finite-difference verification of every layer kind's analytic
// gradients, shared by the unit tests and the acceptance suite.

#include <string>
#include <vector>

#include "histokit/network.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

namespace gradcheck {

using histokit::Rng;
using histokit::TensorT;
namespace nn = histokit::nn;

struct CaseResult {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t params_checked = 0;
    int instances = 0;
};

struct Case {
    std::string name;
    nn::NetworkSpec spec;
    bool training = false;  // exercises the dropout mask path
};

// One tiny classifier per layer kind; spatial sizes stay small so full
// finite differencing over every parameter is affordable.
inline std::vector<Case> standard_cases() {
    using nn::Activation;
    using nn::LayerSpec;
    std::vector<Case> cases;

    auto add = [&](std::string name, std::vector<int> input, std::vector<LayerSpec> layers,
                   bool training = false) {
        Case c;
        c.name = std::move(name);
        c.spec.input_shape = std::move(input);
        c.spec.layers = std::move(layers);
        c.training = training;
        cases.push_back(std::move(c));
    };

    add("conv-sigmoid", {5, 5, 2},
        {LayerSpec::conv2d(3, 3, Activation::Sigmoid), LayerSpec::flatten(),
         LayerSpec::softmax_output(2)});
    add("conv-relu", {5, 5, 2},
        {LayerSpec::conv2d(3, 3, Activation::Relu), LayerSpec::flatten(),
         LayerSpec::softmax_output(2)});
    add("maxpool", {4, 4, 2},
        {LayerSpec::conv2d(2, 3, Activation::Tanh), LayerSpec::maxpool2d(2), LayerSpec::flatten(),
         LayerSpec::softmax_output(2)});
    add("dense", {6},
        {LayerSpec::dense(5, Activation::Sigmoid), LayerSpec::dense(4, Activation::Tanh),
         LayerSpec::softmax_output(3)});
    add("dropout-off", {6},
        {LayerSpec::dense(5, Activation::Relu), LayerSpec::dropout(0.4f),
         LayerSpec::softmax_output(2)});
    add("dropout-train", {6},
        {LayerSpec::dense(5, Activation::Tanh), LayerSpec::dropout(0.4f),
         LayerSpec::softmax_output(2)},
        /*training=*/true);
    add("residual", {4, 4, 2},
        {LayerSpec::residual({LayerSpec::conv2d(2, 3, Activation::Tanh),
                              LayerSpec::conv2d(2, 3, Activation::Linear)}),
         LayerSpec::flatten(), LayerSpec::softmax_output(2)});
    add("lstm", {3, 4},
        {LayerSpec::lstm_cell(3), LayerSpec::flatten(), LayerSpec::softmax_output(2)});
    add("gru", {3, 4},
        {LayerSpec::gru_cell(3), LayerSpec::flatten(), LayerSpec::softmax_output(2)});
    add("lstm-gru-stack", {3, 3},
        {LayerSpec::lstm_cell(3), LayerSpec::gru_cell(2), LayerSpec::flatten(),
         LayerSpec::softmax_output(2)});
    add("softmax-ce", {5}, {LayerSpec::softmax_output(3)});
    add("upsample", {2, 2, 2},
        {LayerSpec::upsample2d(2), LayerSpec::conv2d(2, 3, Activation::Sigmoid),
         LayerSpec::flatten(), LayerSpec::softmax_output(2)});
    add("reshape", {8},
        {LayerSpec::dense(8, Activation::Tanh), LayerSpec::reshape({2, 2, 2}),
         LayerSpec::flatten(), LayerSpec::softmax_output(2)});
    return cases;
}

// Runs `instances` random checks of one case; every parameter is finite
// differenced at h = 1e-5, 64-bit.
inline CaseResult run_case(const Case& c, int instances, std::uint64_t seed_base = 1000) {
    CaseResult result;
    result.name = c.name;
    result.instances = instances;
    const int classes = c.spec.layers.back().classes;

    for (int inst = 0; inst < instances; ++inst) {
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(inst) * 7919;
        Rng rng(seed);
        auto params = nn::init_parameters_for<double>(c.spec.layers, c.spec.input_shape, seed);
        testutil::randomize_params(params, rng, -0.6, 0.6);
        TensorT<double> input(c.spec.input_shape);
        testutil::randomize(input, rng, -1.0, 1.0);
        const int label = rng.uniform_int(0, classes - 1);

        const auto loss = [&]() {
            Rng mask_rng(seed + 17);  // identical dropout mask on every evaluation
            const auto fwd = nn::network_forward(c.spec, params, input, c.training, &mask_rng);
            return nn::cross_entropy_loss(fwd.output, label);
        };

        Rng mask_rng(seed + 17);
        const auto fwd = nn::network_forward(c.spec, params, input, c.training, &mask_rng);
        const auto grads = nn::network_backward(c.spec, params, fwd.trace, label);

        const auto stats = oracles::finite_diff_check(params, grads, loss, 1e-5);
        result.max_rel_err = std::max(result.max_rel_err, stats.max_rel_err);
        result.params_checked += stats.checked;
    }
    return result;
}

}  // namespace gradcheck
