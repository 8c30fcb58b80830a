#include <doctest.h>

#include <cmath>

#include "histokit/hmic.hpp"
#include "histokit/network.hpp"
#include "support/testutil.hpp"

using namespace histokit;
using nn::Activation;
using nn::LayerSpec;

TEST_CASE("conv2d shape preservation and published layer dimensions") {
    // Published three-block architecture at the original 1000x1000 input.
    const nn::NetworkSpec net = hmic::make_parent_network(1000, 3, 32, 128, 5);
    const auto shapes = nn::infer_layer_shapes(net.layers, net.input_shape);
    CHECK(shapes[0] == std::vector<int>{1000, 1000, 32});
    CHECK(shapes[1] == std::vector<int>{200, 200, 32});
    CHECK(shapes[2] == std::vector<int>{200, 200, 32});
    CHECK(shapes[3] == std::vector<int>{40, 40, 32});
    CHECK(shapes[4] == std::vector<int>{40, 40, 64});
    CHECK(shapes[5] == std::vector<int>{8, 8, 64});
    CHECK(shapes[6] == std::vector<int>{4096});
    CHECK(shapes[7] == std::vector<int>{128});
    CHECK(shapes[8] == std::vector<int>{3});

    // Standard parameter-count formula per layer.
    std::vector<int> shape = net.input_shape;
    std::vector<std::size_t> counts;
    for (const auto& l : net.layers) {
        counts.push_back(nn::layer_parameter_count(l, shape));
        shape = nn::infer_output_shape(l, shape);
    }
    CHECK(counts[0] == 896);  // 3*3*3*32 + 32
    CHECK(counts[2] == 9248);
    CHECK(counts[4] == 18496);
    CHECK(counts[7] == 524416);  // 4096*128 + 128
    CHECK(counts[8] == 387);
}

TEST_CASE("conv2d zero kernels, relu -> all-zero output") {
    Tensor input({4, 4, 3});
    Rng rng(7);
    testutil::randomize(input, rng, 0.0, 1.0);
    Tensor kernels({3, 3, 3, 5});
    Tensor bias({5});
    const Tensor out = nn::conv2d_forward(input, kernels, bias, Activation::Relu);
    CHECK(out.shape == std::vector<int>{4, 4, 5});
    for (const float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d 1x1 kernel with bias through sigmoid") {
    Tensor input({1, 1, 1});
    Tensor kernels = Tensor::from({1, 1, 1, 1}, {1.0f});
    Tensor bias = Tensor::from({1}, {0.5f});
    const Tensor out = nn::conv2d_forward(input, kernels, bias, Activation::Sigmoid);
    CHECK(out(0, 0, 0) == doctest::Approx(0.62246).epsilon(1e-4));
}

TEST_CASE("conv2d identity 1x1 kernel is the identity map") {
    Rng rng(3);
    Tensor input({5, 6, 1});
    testutil::randomize(input, rng);
    Tensor kernels = Tensor::from({1, 1, 1, 1}, {1.0f});
    Tensor bias({1});
    const Tensor out = nn::conv2d_forward(input, kernels, bias, Activation::Linear);
    for (std::size_t i = 0; i < input.size(); ++i) CHECK(out.data[i] == input.data[i]);
}

TEST_CASE("conv2d rejects mismatched channels") {
    Tensor input({4, 4, 3});
    Tensor kernels({3, 3, 2, 5});
    Tensor bias({5});
    CHECK_THROWS_AS(nn::conv2d_forward(input, kernels, bias, Activation::Relu), DimensionError);
}

TEST_CASE("maxpool basics") {
    SUBCASE("2x2 window over [[1,2],[3,4]]") {
        const Tensor input = Tensor::from({2, 2, 1}, {1, 2, 3, 4});
        const Tensor out = nn::maxpool2d_forward(input, 2);
        CHECK(out.shape == std::vector<int>{1, 1, 1});
        CHECK(out(0, 0, 0) == 4.0f);
    }
    SUBCASE("constant tensor stays constant") {
        Tensor input({6, 6, 2});
        input.fill(1.25f);
        const Tensor out = nn::maxpool2d_forward(input, 3);
        CHECK(out.shape == std::vector<int>{2, 2, 2});
        for (const float v : out.data) CHECK(v == 1.25f);
    }
    SUBCASE("window larger than input") {
        Tensor input({4, 4, 1});
        CHECK_THROWS_AS(nn::maxpool2d_forward(input, 5), DimensionError);
    }
    SUBCASE("trailing remainder is truncated") {
        Tensor input({7, 7, 1});
        const Tensor out = nn::maxpool2d_forward(input, 2);
        CHECK(out.shape == std::vector<int>{3, 3, 1});
    }
}

TEST_CASE("dense examples") {
    SUBCASE("zero weights, sigmoid -> 0.5 everywhere") {
        const Tensor input = Tensor::from({3}, {0.3f, -2.0f, 5.0f});
        Tensor w({3, 4});
        Tensor b({4});
        const Tensor out = nn::dense_forward(input, w, b, Activation::Sigmoid);
        for (const float v : out.data) CHECK(v == doctest::Approx(0.5));
    }
    SUBCASE("identity weights, relu") {
        const Tensor input = Tensor::from({2}, {-1.0f, 2.0f});
        const Tensor w = Tensor::from({2, 2}, {1, 0, 0, 1});
        Tensor b({2});
        const Tensor out = nn::dense_forward(input, w, b, Activation::Relu);
        CHECK(out(0) == 0.0f);
        CHECK(out(1) == 2.0f);
    }
}

TEST_CASE("softmax") {
    SUBCASE("uniform logits") {
        const Tensor out = nn::softmax(Tensor::from({3}, {4.2f, 4.2f, 4.2f}));
        for (const float v : out.data) CHECK(v == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("closed form [0, ln 3]") {
        const Tensor out = nn::softmax(Tensor::from({2}, {0.0f, std::log(3.0f)}));
        CHECK(out(0) == doctest::Approx(0.25).epsilon(1e-5));
        CHECK(out(1) == doctest::Approx(0.75).epsilon(1e-5));
    }
    SUBCASE("shift invariance and normalization over random logits") {
        Rng rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            Tensor logits({7});
            testutil::randomize(logits, rng, -8.0, 8.0);
            const Tensor a = nn::softmax(logits);
            double sum = 0.0;
            for (const float v : a.data) {
                CHECK(v > 0.0f);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
            Tensor shifted = logits;
            const float c = static_cast<float>(rng.uniform(-5.0, 5.0));
            for (auto& v : shifted.data) v += c;
            const Tensor b = nn::softmax(shifted);
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-5));
            }
        }
    }
}

namespace {

nn::ParametersT<double> make_cell_params(const LayerSpec& cell, int t, int d) {
    return nn::init_parameters_for<double>({cell}, {t, d}, 99);
}

}  // namespace

TEST_CASE("lstm cell step") {
    const int d = 3, u = 2;
    auto params = make_cell_params(LayerSpec::lstm_cell(u), 4, d);
    auto& lp = params.layers[0];

    SUBCASE("all-zero weights and state") {
        testutil::zero_params(params);
        TensorT<double> x({d}), h({u}), c({u});
        x(0) = 0.7;  // nonzero input cannot leak through zero weights
        nn::LstmGatesT<double> gates;
        auto [h_t, c_t] = nn::lstm_cell_step(x, h, c, lp, &gates);
        for (int j = 0; j < u; ++j) {
            CHECK(gates.input_gate(j) == doctest::Approx(0.5));
            CHECK(gates.forget_gate(j) == doctest::Approx(0.5));
            CHECK(gates.output_gate(j) == doctest::Approx(0.5));
            CHECK(gates.candidate(j) == doctest::Approx(0.0));
            CHECK(c_t(j) == doctest::Approx(0.0));
            CHECK(h_t(j) == doctest::Approx(0.0));
        }
    }

    SUBCASE("saturated forget gate keeps the cell state") {
        Rng rng(5);
        testutil::randomize_params(params, rng, -0.3, 0.3);
        lp.tensors[5].fill(20.0);  // forget-gate bias -> sigmoid ~ 1
        TensorT<double> x({d}), h({u}), c({u});
        testutil::randomize(x, rng);
        testutil::randomize(h, rng);
        testutil::randomize(c, rng);
        nn::LstmGatesT<double> gates;
        auto [h_t, c_t] = nn::lstm_cell_step(x, h, c, lp, &gates);
        (void)h_t;
        for (int j = 0; j < u; ++j) {
            const double expect = c(j) + gates.input_gate(j) * gates.candidate(j);
            CHECK(c_t(j) == doctest::Approx(expect).epsilon(1e-6));
        }
    }
}

TEST_CASE("gru cell step") {
    const int d = 3, u = 2;
    auto params = make_cell_params(LayerSpec::gru_cell(u), 4, d);
    auto& lp = params.layers[0];

    SUBCASE("zero weights halve the previous state") {
        testutil::zero_params(params);
        TensorT<double> x({d}), h({u});
        h(0) = 0.8;
        h(1) = -0.4;
        const auto h_t = nn::gru_cell_step(x, h, lp);
        CHECK(h_t(0) == doctest::Approx(0.4));
        CHECK(h_t(1) == doctest::Approx(-0.2));
    }

    SUBCASE("zero state and zero weights stay at zero") {
        testutil::zero_params(params);
        TensorT<double> x({d}), h({u});
        x(1) = 3.0;
        const auto h_t = nn::gru_cell_step(x, h, lp);
        for (int j = 0; j < u; ++j) CHECK(h_t(j) == doctest::Approx(0.0));
    }

    SUBCASE("saturated update gate keeps the previous state") {
        Rng rng(6);
        testutil::randomize_params(params, rng, -0.3, 0.3);
        lp.tensors[2].fill(20.0);  // update-gate bias -> z ~ 1
        TensorT<double> x({d}), h({u});
        testutil::randomize(x, rng);
        testutil::randomize(h, rng);
        const auto h_t = nn::gru_cell_step(x, h, lp);
        for (int j = 0; j < u; ++j) CHECK(h_t(j) == doctest::Approx(h(j)).epsilon(1e-6));
    }
}

TEST_CASE("residual block") {
    const std::vector<LayerSpec> inner{LayerSpec::conv2d(2, 3, Activation::Linear)};
    nn::ParametersT<float> inner_params = nn::init_parameters_for<float>(inner, {4, 4, 2}, 21);

    SUBCASE("zero inner weights give the identity map") {
        testutil::zero_params(inner_params);
        Rng rng(8);
        Tensor input({4, 4, 2});
        testutil::randomize(input, rng);
        const Tensor out = nn::residual_block_forward(input, inner, inner_params);
        for (std::size_t i = 0; i < input.size(); ++i) {
            CHECK(out.data[i] == doctest::Approx(input.data[i]));
        }
    }

    SUBCASE("constant-output inner stack adds the constant") {
        testutil::zero_params(inner_params);
        inner_params.layers[0].tensors[1].fill(0.75f);  // conv bias only
        Tensor input({4, 4, 2});
        Rng rng(9);
        testutil::randomize(input, rng);
        const Tensor out = nn::residual_block_forward(input, inner, inner_params);
        for (std::size_t i = 0; i < input.size(); ++i) {
            CHECK(out.data[i] == doctest::Approx(input.data[i] + 0.75f));
        }
    }

    SUBCASE("finite-difference Jacobian diagonal is 1 for zero inner weights") {
        testutil::zero_params(inner_params);
        Tensor input({4, 4, 2});
        Rng rng(10);
        testutil::randomize(input, rng);
        const double h = 1e-3;
        for (const std::size_t idx : {std::size_t{0}, std::size_t{9}, std::size_t{31}}) {
            Tensor plus = input, minus = input;
            plus.data[idx] += static_cast<float>(h);
            minus.data[idx] -= static_cast<float>(h);
            const Tensor op = nn::residual_block_forward(plus, inner, inner_params);
            const Tensor om = nn::residual_block_forward(minus, inner, inner_params);
            const double diag = (op.data[idx] - om.data[idx]) / (2 * h);
            CHECK(diag >= 0.99);
        }
    }

    SUBCASE("shape-changing inner stack is rejected") {
        const std::vector<LayerSpec> bad{LayerSpec::conv2d(3, 3, Activation::Linear)};
        auto bad_params = nn::init_parameters_for<float>(bad, {4, 4, 2}, 3);
        Tensor input({4, 4, 2});
        CHECK_THROWS_AS(nn::residual_block_forward(input, bad, bad_params), DimensionError);
    }
}

TEST_CASE("network forward") {
    SUBCASE("scaled published architecture emits 3 probabilities") {
        // 125 = 5^3 keeps the three 5x5 pooling stages intact.
        const nn::NetworkSpec net = hmic::make_parent_network(125, 3, 8, 16, 5);
        const nn::Parameters params = nn::init_parameters(net, 42);
        Tensor input({125, 125, 3});
        Rng rng(12);
        testutil::randomize(input, rng, 0.0, 1.0);
        const auto fwd = nn::network_forward(net, params, input);
        CHECK(fwd.output.size() == 3);
        double sum = 0.0;
        for (const float v : fwd.output.data) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }

    SUBCASE("inference is deterministic with dropout present") {
        nn::NetworkSpec net;
        net.input_shape = {10};
        net.layers = {LayerSpec::dense(8, Activation::Relu), LayerSpec::dropout(0.5f),
                      LayerSpec::softmax_output(4)};
        const nn::Parameters params = nn::init_parameters(net, 5);
        Tensor input({10});
        Rng rng(13);
        testutil::randomize(input, rng);
        const auto a = nn::network_forward(net, params, input);
        const auto b = nn::network_forward(net, params, input);
        CHECK(a.output.data == b.output.data);
    }

    SUBCASE("hand-set dense + softmax matches manual computation") {
        nn::NetworkSpec net;
        net.input_shape = {2};
        net.layers = {LayerSpec::softmax_output(2)};
        nn::Parameters params = nn::init_parameters(net, 1);
        params.layers[0].tensors[0] = Tensor::from({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
        params.layers[0].tensors[1] = Tensor::from({2}, {0.0f, 0.0f});
        const Tensor input = Tensor::from({2}, {1.0f, 2.0f});
        const auto fwd = nn::network_forward(net, params, input);
        // logits = (1, 2); softmax = e^1/(e^1+e^2), e^2/(e^1+e^2)
        const double e1 = std::exp(1.0), e2 = std::exp(2.0);
        CHECK(fwd.output(0) == doctest::Approx(e1 / (e1 + e2)).epsilon(1e-5));
        CHECK(fwd.output(1) == doctest::Approx(e2 / (e1 + e2)).epsilon(1e-5));
    }
}

TEST_CASE("cross entropy loss") {
    CHECK(nn::cross_entropy_loss(Tensor::from({2}, {1.0f, 0.0f}), 0) == doctest::Approx(0.0));
    CHECK(nn::cross_entropy_loss(Tensor::from({3}, {1.0f / 3, 1.0f / 3, 1.0f / 3}), 1) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-5));
    CHECK(nn::cross_entropy_loss(Tensor::from({4}, {0.25f, 0.25f, 0.25f, 0.25f}), 2) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-5));
    CHECK_THROWS_AS(nn::cross_entropy_loss(Tensor::from({2}, {0.5f, 0.5f}), 2), DomainError);
    // Clamp guards the log at zero probability.
    CHECK(std::isfinite(nn::cross_entropy_loss(Tensor::from({2}, {0.0f, 1.0f}), 0)));
}

TEST_CASE("classifier validation enforces the softmax tail") {
    nn::NetworkSpec net;
    net.input_shape = {4};
    net.layers = {LayerSpec::dense(3, Activation::Relu)};
    CHECK_THROWS_AS(nn::validate_classifier(net), ConfigError);
}
