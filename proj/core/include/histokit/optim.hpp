#pragma once

#include <cstdint>
#include <string>

#include "histokit/params.hpp"

namespace histokit::optim {

enum class OptimizerKind { Sgd, SgdMomentum, Adam, RmsProp };

const char* optimizer_kind_name(OptimizerKind k);
OptimizerKind optimizer_kind_from_name(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double lr = 0.01;
    double momentum = 0.9;   // SgdMomentum gamma
    double beta1 = 0.9;      // Adam
    double beta2 = 0.999;    // Adam
    double decay = 0.9;      // RmsProp
    double eps = 1e-8;

    static OptimizerConfig sgd(double lr = 0.01);
    // Default rate keeps the heavy-ball update overdamped on unit-curvature
    // objectives ((1 + gamma - lr)^2 >= 4*gamma).
    static OptimizerConfig sgd_momentum(double lr = 0.001, double gamma = 0.9);
    static OptimizerConfig adam(double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999,
                                double eps = 1e-8);
    static OptimizerConfig rmsprop(double lr = 1e-5, double decay = 0.9, double eps = 1e-8);

    void validate() const;
};

// Per-model optimizer state: step counter plus auxiliary tensors shaped
// like the parameters (velocity / first & second moments / square cache).
struct OptimizerState {
    OptimizerConfig config;
    long long t = 0;
    nn::Parameters aux1;  // momentum velocity, Adam m, RmsProp cache
    nn::Parameters aux2;  // Adam v
};

OptimizerState make_optimizer_state(const OptimizerConfig& config, const nn::Parameters& params);

// theta <- theta - alpha*g; momentum variant keeps a velocity
// v <- gamma*v + alpha*g and subtracts it.
void sgd_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state);

// m <- b1*m + (1-b1)*g, v <- b2*v + (1-b2)*g^2, bias-corrected by 1-b^t,
// theta <- theta - alpha*m_hat/(sqrt(v_hat)+eps). t increments first.
void adam_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state);

// cache <- decay*cache + (1-decay)*g^2, theta <- theta - alpha*g/(sqrt(cache)+eps).
// No bias correction.
void rmsprop_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state);

// Dispatch on state.config.kind.
void optimizer_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state);

}  // namespace histokit::optim
