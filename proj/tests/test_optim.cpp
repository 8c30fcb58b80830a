#include <doctest.h>

#include <cmath>

#include "histokit/optim.hpp"

using namespace histokit;
using optim::OptimizerConfig;

namespace {

// Single-scalar parameter tree.
nn::Parameters scalar_params(float value) {
    nn::Parameters p;
    p.layers.resize(1);
    p.layers[0].tensors.push_back(Tensor::from({1}, {value}));
    return p;
}

nn::Gradients scalar_grad(float value) { return scalar_params(value); }

float value_of(const nn::Parameters& p) { return p.layers[0].tensors[0](0); }

}  // namespace

TEST_CASE("sgd step") {
    auto params = scalar_params(1.0f);
    auto state = optim::make_optimizer_state(OptimizerConfig::sgd(0.1), params);

    SUBCASE("zero gradient is a fixed point") {
        optim::sgd_step(params, scalar_grad(0.0f), state);
        CHECK(value_of(params) == 1.0f);
    }
    SUBCASE("plain arithmetic") {
        optim::sgd_step(params, scalar_grad(2.0f), state);
        CHECK(value_of(params) == doctest::Approx(0.8f));
    }
}

TEST_CASE("momentum accumulates velocity") {
    auto params = scalar_params(0.0f);
    auto state = optim::make_optimizer_state(OptimizerConfig::sgd_momentum(0.1, 0.9), params);
    optim::sgd_step(params, scalar_grad(1.0f), state);
    const float after_first = value_of(params);
    CHECK(after_first == doctest::Approx(-0.1f));
    optim::sgd_step(params, scalar_grad(1.0f), state);
    // Second update magnitude: 0.9*0.1 + 0.1 = 0.19.
    CHECK(value_of(params) - after_first == doctest::Approx(-0.19f));
}

TEST_CASE("adam first step") {
    auto params = scalar_params(0.5f);
    auto state = optim::make_optimizer_state(OptimizerConfig::adam(0.001), params);
    optim::adam_step(params, scalar_grad(1.0f), state);
    // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1, step ~ -alpha.
    CHECK(state.t == 1);
    CHECK(state.aux1.layers[0].tensors[0](0) == doctest::Approx(0.1f));
    CHECK(state.aux2.layers[0].tensors[0](0) == doctest::Approx(0.001f));
    CHECK(value_of(params) == doctest::Approx(0.5f - 0.001f).epsilon(1e-5));
}

TEST_CASE("adam zero gradient keeps parameters") {
    auto params = scalar_params(0.5f);
    auto state = optim::make_optimizer_state(OptimizerConfig::adam(0.001), params);
    for (int i = 0; i < 10; ++i) optim::adam_step(params, scalar_grad(0.0f), state);
    CHECK(value_of(params) == 0.5f);
}

TEST_CASE("rmsprop step") {
    auto params = scalar_params(0.0f);
    auto state = optim::make_optimizer_state(OptimizerConfig::rmsprop(0.01, 0.9, 1e-12), params);
    optim::rmsprop_step(params, scalar_grad(2.0f), state);
    // cache = 0.1 * 4 = 0.4; step = -0.01 * 2 / sqrt(0.4).
    CHECK(state.aux1.layers[0].tensors[0](0) == doctest::Approx(0.4f));
    CHECK(value_of(params) == doctest::Approx(-0.0316228).epsilon(1e-4));

    SUBCASE("zero gradient afterwards is a fixed point") {
        const float before = value_of(params);
        optim::rmsprop_step(params, scalar_grad(0.0f), state);
        CHECK(value_of(params) == before);
    }
}

TEST_CASE("rmsprop default rate matches the severity trainer") {
    const auto c = OptimizerConfig::rmsprop();
    CHECK(c.lr == doctest::Approx(1e-5));
    CHECK(c.decay == doctest::Approx(0.9));
}

TEST_CASE("adam bounded step under constant unit gradients") {
    auto params = scalar_params(5.0f);
    auto state = optim::make_optimizer_state(OptimizerConfig::adam(0.01), params);
    float prev = value_of(params);
    for (int i = 0; i < 100; ++i) {
        optim::adam_step(params, scalar_grad(1.0f), state);
        const float step = std::abs(value_of(params) - prev);
        CHECK(step <= 2.0f * 0.01f);
        prev = value_of(params);
    }
}

TEST_CASE("every optimizer descends a convex quadratic") {
    // f(theta) = theta^2 / 2, grad = theta; every optimizer at its default rate.
    const OptimizerConfig configs[] = {
        OptimizerConfig::sgd(),
        OptimizerConfig::sgd_momentum(),
        OptimizerConfig::adam(),
        OptimizerConfig::rmsprop(),
    };
    for (const auto& config : configs) {
        CAPTURE(optim::optimizer_kind_name(config.kind));
        auto params = scalar_params(1.0f);
        auto state = optim::make_optimizer_state(config, params);
        double prev_f = 0.5 * value_of(params) * value_of(params);
        for (int step = 1; step <= 200; ++step) {
            optim::optimizer_step(params, scalar_grad(value_of(params)), state);
            const double f = 0.5 * value_of(params) * value_of(params);
            if (step > 3) CHECK(f <= prev_f + 1e-12);
            prev_f = f;
        }
    }
}

TEST_CASE("optimizer config validation") {
    CHECK_THROWS_AS(OptimizerConfig::sgd(0.0), ConfigError);
    CHECK_THROWS_AS(OptimizerConfig::adam(0.001, 1.0), ConfigError);
    CHECK_THROWS_AS(OptimizerConfig::rmsprop(0.01, 1.0), ConfigError);
}

TEST_CASE("step kind must match state kind") {
    auto params = scalar_params(1.0f);
    auto state = optim::make_optimizer_state(OptimizerConfig::sgd(0.1), params);
    CHECK_THROWS_AS(optim::adam_step(params, scalar_grad(1.0f), state), StateError);
    CHECK_THROWS_AS(optim::rmsprop_step(params, scalar_grad(1.0f), state), StateError);
}
