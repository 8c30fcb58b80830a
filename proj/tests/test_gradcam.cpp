#include <doctest.h>

#include <algorithm>

#include "histokit/network.hpp"
#include "support/testutil.hpp"

using namespace histokit;
using nn::Activation;
using nn::LayerSpec;

namespace {

// Class 0's logit is the mean of the (identity) conv feature map; class 1
// never sees the features.
nn::NetworkSpec mean_score_net(int side) {
    nn::NetworkSpec net;
    net.input_shape = {side, side, 1};
    net.layers = {LayerSpec::conv2d(1, 1, Activation::Linear), LayerSpec::flatten(),
                  LayerSpec::softmax_output(2)};
    return net;
}

nn::ParametersT<double> mean_score_params(const nn::NetworkSpec& net, int side) {
    auto params = nn::init_parameters_for<double>(net.layers, net.input_shape, 1);
    testutil::zero_params(params);
    params.layers[0].tensors[0].fill(1.0);  // identity 1x1 kernel
    auto& w = params.layers[2].tensors[0];
    for (int i = 0; i < side * side; ++i) w(i, 0) = 1.0 / (side * side);
    return params;
}

}  // namespace

TEST_CASE("grad_cam on a mean-of-feature-map score recovers the map") {
    const int side = 5;
    const auto net = mean_score_net(side);
    const auto params = mean_score_params(net, side);

    TensorT<double> input({side, side, 1});
    Rng rng(31);
    testutil::randomize(input, rng, -1.0, 1.0);

    const auto heat = nn::grad_cam(net, params, input, 0);
    CHECK(heat.shape == std::vector<int>{side, side});

    // Expected: min-max normalized ReLU of the feature map (== input here).
    TensorT<double> expected({side, side});
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) expected(y, x) = std::max(0.0, input(y, x, 0));
    const double mx = *std::max_element(expected.data.begin(), expected.data.end());
    const double mn = *std::min_element(expected.data.begin(), expected.data.end());
    for (auto& v : expected.data) v = (v - mn) / (mx - mn);

    for (std::size_t i = 0; i < heat.size(); ++i) {
        CHECK(heat.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("grad_cam zero-gradient class yields an all-zero heatmap") {
    const int side = 4;
    const auto net = mean_score_net(side);
    const auto params = mean_score_params(net, side);
    TensorT<double> input({side, side, 1});
    Rng rng(32);
    testutil::randomize(input, rng);
    const auto heat = nn::grad_cam(net, params, input, 1);
    for (const double v : heat.data) CHECK(v == 0.0);
}

TEST_CASE("grad_cam output stays in [0,1] and matches input dims") {
    nn::NetworkSpec net;
    net.input_shape = {8, 8, 2};
    net.layers = {LayerSpec::conv2d(3, 3, Activation::Relu), LayerSpec::maxpool2d(2),
                  LayerSpec::conv2d(4, 3, Activation::Relu), LayerSpec::flatten(),
                  LayerSpec::softmax_output(3)};
    const auto params = nn::init_parameters(net, 77);
    Tensor input({8, 8, 2});
    Rng rng(33);
    testutil::randomize(input, rng, 0.0, 1.0);
    const auto heat = nn::grad_cam(net, params, input, 2);
    CHECK(heat.shape == std::vector<int>{8, 8});  // bilinear upsample from 4x4
    for (const float v : heat.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("grad_cam requires a conv layer") {
    nn::NetworkSpec net;
    net.input_shape = {6};
    net.layers = {LayerSpec::dense(4, Activation::Relu), LayerSpec::softmax_output(2)};
    const auto params = nn::init_parameters(net, 5);
    Tensor input({6});
    CHECK_THROWS_AS(nn::grad_cam(net, params, input, 0), ConfigError);
}
