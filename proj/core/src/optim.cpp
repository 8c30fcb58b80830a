#include "histokit/optim.hpp"

#include <cmath>

namespace histokit::optim {

const char* optimizer_kind_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::SgdMomentum: return "sgd_momentum";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::RmsProp: return "rmsprop";
    }
    return "?";
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "sgd_momentum") return OptimizerKind::SgdMomentum;
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "rmsprop") return OptimizerKind::RmsProp;
    throw ConfigError("unknown optimizer: " + name);
}

OptimizerConfig OptimizerConfig::sgd(double lr) {
    OptimizerConfig c;
    c.kind = OptimizerKind::Sgd;
    c.lr = lr;
    c.validate();
    return c;
}

OptimizerConfig OptimizerConfig::sgd_momentum(double lr, double gamma) {
    OptimizerConfig c;
    c.kind = OptimizerKind::SgdMomentum;
    c.lr = lr;
    c.momentum = gamma;
    c.validate();
    return c;
}

OptimizerConfig OptimizerConfig::adam(double lr, double beta1, double beta2, double eps) {
    OptimizerConfig c;
    c.kind = OptimizerKind::Adam;
    c.lr = lr;
    c.beta1 = beta1;
    c.beta2 = beta2;
    c.eps = eps;
    c.validate();
    return c;
}

OptimizerConfig OptimizerConfig::rmsprop(double lr, double decay, double eps) {
    OptimizerConfig c;
    c.kind = OptimizerKind::RmsProp;
    c.lr = lr;
    c.decay = decay;
    c.eps = eps;
    c.validate();
    return c;
}

void OptimizerConfig::validate() const {
    if (!(lr > 0)) throw ConfigError("optimizer lr must be > 0");
    if (!(eps > 0)) throw ConfigError("optimizer eps must be > 0");
    if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw ConfigError("adam betas must be in [0, 1)");
    }
    if (decay < 0 || decay >= 1) throw ConfigError("rmsprop decay must be in [0, 1)");
}

OptimizerState make_optimizer_state(const OptimizerConfig& config, const nn::Parameters& params) {
    config.validate();
    OptimizerState st;
    st.config = config;
    switch (config.kind) {
        case OptimizerKind::Sgd:
            break;
        case OptimizerKind::SgdMomentum:
        case OptimizerKind::RmsProp:
            st.aux1 = nn::zero_like(params);
            break;
        case OptimizerKind::Adam:
            st.aux1 = nn::zero_like(params);
            st.aux2 = nn::zero_like(params);
            break;
    }
    return st;
}

void sgd_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state) {
    const auto& c = state.config;
    state.t += 1;
    if (c.kind == OptimizerKind::Sgd) {
        const float lr = static_cast<float>(c.lr);
        nn::zip_tensors(params, grads, [&](nn::Tensor& p, const nn::Tensor& g) {
            require_shape(g.shape, p.shape, "sgd_step");
            for (std::size_t i = 0; i < p.size(); ++i) p.data[i] -= lr * g.data[i];
        });
        return;
    }
    if (c.kind != OptimizerKind::SgdMomentum) throw StateError("sgd_step on non-sgd state");
    const float lr = static_cast<float>(c.lr);
    const float gamma = static_cast<float>(c.momentum);
    auto v_it = nn::tensor_list(state.aux1);
    std::size_t k = 0;
    nn::zip_tensors(params, grads, [&](nn::Tensor& p, const nn::Tensor& g) {
        require_shape(g.shape, p.shape, "sgd_step");
        nn::Tensor& v = *v_it[k++];
        for (std::size_t i = 0; i < p.size(); ++i) {
            v.data[i] = gamma * v.data[i] + lr * g.data[i];
            p.data[i] -= v.data[i];
        }
    });
}

void adam_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state) {
    const auto& c = state.config;
    if (c.kind != OptimizerKind::Adam) throw StateError("adam_step on non-adam state");
    state.t += 1;
    const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    auto m_it = nn::tensor_list(state.aux1);
    auto v_it = nn::tensor_list(state.aux2);
    std::size_t k = 0;
    nn::zip_tensors(params, grads, [&](nn::Tensor& p, const nn::Tensor& g) {
        require_shape(g.shape, p.shape, "adam_step");
        nn::Tensor& m = *m_it[k];
        nn::Tensor& v = *v_it[k];
        ++k;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data[i];
            m.data[i] = static_cast<float>(c.beta1 * m.data[i] + (1.0 - c.beta1) * gi);
            v.data[i] = static_cast<float>(c.beta2 * v.data[i] + (1.0 - c.beta2) * gi * gi);
            const double m_hat = m.data[i] / corr1;
            const double v_hat = v.data[i] / corr2;
            p.data[i] -= static_cast<float>(c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
        }
    });
}

void rmsprop_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state) {
    const auto& c = state.config;
    if (c.kind != OptimizerKind::RmsProp) throw StateError("rmsprop_step on non-rmsprop state");
    state.t += 1;
    auto cache_it = nn::tensor_list(state.aux1);
    std::size_t k = 0;
    nn::zip_tensors(params, grads, [&](nn::Tensor& p, const nn::Tensor& g) {
        require_shape(g.shape, p.shape, "rmsprop_step");
        nn::Tensor& cache = *cache_it[k++];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data[i];
            cache.data[i] = static_cast<float>(c.decay * cache.data[i] + (1.0 - c.decay) * gi * gi);
            p.data[i] -= static_cast<float>(c.lr * gi / (std::sqrt(static_cast<double>(cache.data[i])) + c.eps));
        }
    });
}

void optimizer_step(nn::Parameters& params, const nn::Gradients& grads, OptimizerState& state) {
    switch (state.config.kind) {
        case OptimizerKind::Sgd:
        case OptimizerKind::SgdMomentum:
            sgd_step(params, grads, state);
            return;
        case OptimizerKind::Adam:
            adam_step(params, grads, state);
            return;
        case OptimizerKind::RmsProp:
            rmsprop_step(params, grads, state);
            return;
    }
}

}  // namespace histokit::optim
