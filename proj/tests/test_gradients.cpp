#include <doctest.h>

#include "support/gradcheck.hpp"

using namespace histokit;

TEST_CASE("analytic gradients match central finite differences per layer kind") {
    for (const auto& c : gradcheck::standard_cases()) {
        CAPTURE(c.name);
        const auto r = gradcheck::run_case(c, 3);
        CHECK(r.params_checked > 0);
        CHECK_MESSAGE(r.max_rel_err < 1e-5, c.name, " max rel err ", r.max_rel_err);
    }
}

TEST_CASE("softmax-CE logit gradient is probs minus onehot") {
    nn::NetworkSpec net;
    net.input_shape = {4};
    net.layers = {nn::LayerSpec::softmax_output(3)};
    auto params = nn::init_parameters_for<double>(net.layers, net.input_shape, 7);
    Rng rng(7);
    testutil::randomize_params(params, rng);
    TensorT<double> input({4});
    testutil::randomize(input, rng);

    const auto fwd = nn::network_forward(net, params, input);
    // One-hot probabilities at the label: every output-layer gradient is 0.
    nn::ForwardTraceT<double> trace = fwd.trace;
    trace.layers[0].output.fill(0.0);
    trace.layers[0].output(1) = 1.0;
    const auto grads = nn::network_backward(net, params, trace, 1);
    nn::for_each_tensor(grads, [](const TensorT<double>& t) {
        for (const double v : t.data) CHECK(v == doctest::Approx(0.0));
    });

    // Dense 1-D case: d loss / d w = (p - y) * x, by hand.
    const auto real_grads = nn::network_backward(net, params, fwd.trace, 2);
    const auto& dW = real_grads.layers[0].tensors[0];
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double expected = (fwd.output(j) - (j == 2 ? 1.0 : 0.0)) * input(i);
            CHECK(dW(i, j) == doctest::Approx(expected).epsilon(1e-9));
        }
    }
}

TEST_CASE("maxpool backward routes gradient only to argmax positions") {
    nn::NetworkSpec net;
    net.input_shape = {4, 4, 1};
    net.layers = {nn::LayerSpec::maxpool2d(2)};
    nn::ParametersT<double> params;
    params.layers.resize(1);

    TensorT<double> input({4, 4, 1});
    Rng rng(15);
    testutil::randomize(input, rng);
    auto fwd = nn::stack_forward(net.layers, params, input);

    TensorT<double> d_out({2, 2, 1});
    testutil::randomize(d_out, rng, 0.1, 1.0);
    const auto bwd = nn::stack_backward(net.layers, params, fwd.trace, d_out);

    double routed_sum = 0.0;
    int nonzero = 0;
    for (const double v : bwd.d_input.data) {
        routed_sum += v;
        if (v != 0.0) ++nonzero;
    }
    double upstream_sum = 0.0;
    for (const double v : d_out.data) upstream_sum += v;
    CHECK(nonzero == 4);  // one argmax per window
    CHECK(routed_sum == doctest::Approx(upstream_sum).epsilon(1e-12));

    // Routed positions coincide with the recorded argmaxes.
    for (const int idx : fwd.trace.layers[0].argmax) {
        CHECK(bwd.d_input.data[static_cast<std::size_t>(idx)] != 0.0);
    }
}

TEST_CASE("residual Jacobian equals identity plus inner Jacobian") {
    using nn::LayerSpec;
    const std::vector<LayerSpec> inner{LayerSpec::conv2d(1, 1, nn::Activation::Linear)};
    nn::NetworkSpec res_net;
    res_net.input_shape = {2, 2, 1};
    res_net.layers = {LayerSpec::residual(inner)};
    auto params = nn::init_parameters_for<double>(res_net.layers, res_net.input_shape, 3);
    // 1x1 linear conv with weight w: residual output = (1 + w) * x.
    const double w = 0.37;
    params.layers[0].inner[0].tensors[0].fill(w);
    params.layers[0].inner[0].tensors[1].fill(0.0);

    TensorT<double> input({2, 2, 1});
    Rng rng(4);
    testutil::randomize(input, rng);
    auto fwd = nn::stack_forward(res_net.layers, params, input);
    for (std::size_t i = 0; i < input.size(); ++i) {
        CHECK(fwd.output.data[i] == doctest::Approx((1.0 + w) * input.data[i]));
    }

    TensorT<double> d_out({2, 2, 1});
    d_out.fill(1.0);
    const auto bwd = nn::stack_backward(res_net.layers, params, fwd.trace, d_out);
    for (const double v : bwd.d_input.data) CHECK(v == doctest::Approx(1.0 + w));
}

TEST_CASE("backward rejects a trace from a different spec") {
    nn::NetworkSpec a;
    a.input_shape = {4};
    a.layers = {nn::LayerSpec::softmax_output(2)};
    nn::NetworkSpec b = a;
    b.layers.insert(b.layers.begin(), nn::LayerSpec::dense(4, nn::Activation::Relu));

    const auto params_a = nn::init_parameters(a, 1);
    const auto params_b = nn::init_parameters(b, 1);
    Tensor input({4});
    const auto fwd = nn::network_forward(a, params_a, input);
    CHECK_THROWS_AS(nn::network_backward(b, params_b, fwd.trace, 0), StateError);
}
