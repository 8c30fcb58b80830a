#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "histokit/layers.hpp"
#include "histokit/rng.hpp"
#include "histokit/tensor.hpp"

namespace histokit::nn {

// Weights of one layer. `tensors` order is fixed per kind (see
// init docs below); Residual keeps its own list empty and nests
// per-inner-layer entries instead. Gradients reuse the same tree.
template <class S>
struct LayerParamsT {
    std::vector<TensorT<S>> tensors;
    std::vector<LayerParamsT<S>> inner;
};

template <class S>
struct ParametersT {
    std::vector<LayerParamsT<S>> layers;
};

using LayerParams = LayerParamsT<float>;
using Parameters = ParametersT<float>;
using Gradients = Parameters;

template <class S, class F>
void for_each_tensor(LayerParamsT<S>& lp, F&& f) {
    for (auto& t : lp.tensors) f(t);
    for (auto& in : lp.inner) for_each_tensor(in, f);
}

template <class S, class F>
void for_each_tensor(const LayerParamsT<S>& lp, F&& f) {
    for (const auto& t : lp.tensors) f(t);
    for (const auto& in : lp.inner) for_each_tensor(in, f);
}

template <class S, class F>
void for_each_tensor(ParametersT<S>& p, F&& f) {
    for (auto& l : p.layers) for_each_tensor(l, f);
}

template <class S, class F>
void for_each_tensor(const ParametersT<S>& p, F&& f) {
    for (const auto& l : p.layers) for_each_tensor(l, f);
}

// Applies f(TensorT& a, const TensorT& b) pairwise over two trees of
// identical structure (e.g. params and grads).
template <class S, class F>
void zip_tensors(LayerParamsT<S>& a, const LayerParamsT<S>& b, F&& f) {
    if (a.tensors.size() != b.tensors.size() || a.inner.size() != b.inner.size()) {
        throw DimensionError("parameter trees have different structure");
    }
    for (std::size_t i = 0; i < a.tensors.size(); ++i) f(a.tensors[i], b.tensors[i]);
    for (std::size_t i = 0; i < a.inner.size(); ++i) zip_tensors(a.inner[i], b.inner[i], f);
}

template <class S, class F>
void zip_tensors(ParametersT<S>& a, const ParametersT<S>& b, F&& f) {
    if (a.layers.size() != b.layers.size()) {
        throw DimensionError("parameter trees have different layer counts");
    }
    for (std::size_t i = 0; i < a.layers.size(); ++i) zip_tensors(a.layers[i], b.layers[i], f);
}

template <class S>
LayerParamsT<S> zero_like(const LayerParamsT<S>& lp) {
    LayerParamsT<S> out;
    out.tensors.reserve(lp.tensors.size());
    for (const auto& t : lp.tensors) out.tensors.emplace_back(t.shape);
    out.inner.reserve(lp.inner.size());
    for (const auto& in : lp.inner) out.inner.push_back(zero_like(in));
    return out;
}

template <class S>
ParametersT<S> zero_like(const ParametersT<S>& p) {
    ParametersT<S> out;
    out.layers.reserve(p.layers.size());
    for (const auto& l : p.layers) out.layers.push_back(zero_like(l));
    return out;
}

template <class To, class From>
LayerParamsT<To> params_cast_layer(const LayerParamsT<From>& lp) {
    LayerParamsT<To> out;
    out.tensors.reserve(lp.tensors.size());
    for (const auto& t : lp.tensors) out.tensors.push_back(tensor_cast<To>(t));
    out.inner.reserve(lp.inner.size());
    for (const auto& in : lp.inner) out.inner.push_back(params_cast_layer<To>(in));
    return out;
}

template <class To, class From>
ParametersT<To> params_cast(const ParametersT<From>& p) {
    ParametersT<To> out;
    out.layers.reserve(p.layers.size());
    for (const auto& l : p.layers) out.layers.push_back(params_cast_layer<To>(l));
    return out;
}

// Tensors in deterministic serialization order: layer order, within a layer
// the fixed kind order, residual inner layers depth-first.
template <class S>
std::vector<const TensorT<S>*> tensor_list(const ParametersT<S>& p) {
    std::vector<const TensorT<S>*> out;
    for_each_tensor(p, [&](const TensorT<S>& t) { out.push_back(&t); });
    return out;
}

template <class S>
std::vector<TensorT<S>*> tensor_list(ParametersT<S>& p) {
    std::vector<TensorT<S>*> out;
    for_each_tensor(p, [&](TensorT<S>& t) { out.push_back(&t); });
    return out;
}

namespace detail {

template <class S>
TensorT<S> glorot_uniform(std::vector<int> shape, double fan_in, double fan_out, Rng& rng) {
    TensorT<S> t(std::move(shape));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data) v = static_cast<S>(rng.uniform(-limit, limit));
    return t;
}

template <class S>
LayerParamsT<S> init_layer(const LayerSpec& layer, const std::vector<int>& input, Rng& rng) {
    using Kind = LayerSpec::Kind;
    LayerParamsT<S> lp;
    switch (layer.kind) {
        case Kind::Conv2D: {
            const int k = layer.kernel_size;
            const int cin = input[2];
            const int cout = layer.filters;
            lp.tensors.push_back(glorot_uniform<S>({k, k, cin, cout},
                                                   double(k) * k * cin, double(k) * k * cout, rng));
            lp.tensors.emplace_back(std::vector<int>{cout});
            break;
        }
        case Kind::Dense: {
            const int n = input[0];
            lp.tensors.push_back(glorot_uniform<S>({n, layer.units}, n, layer.units, rng));
            lp.tensors.emplace_back(std::vector<int>{layer.units});
            break;
        }
        case Kind::SoftmaxOutput: {
            const int n = input[0];
            lp.tensors.push_back(glorot_uniform<S>({n, layer.classes}, n, layer.classes, rng));
            lp.tensors.emplace_back(std::vector<int>{layer.classes});
            break;
        }
        case Kind::LstmCell: {
            const int d = input.size() == 3 ? input[1] * input[2] : input[1];
            const int u = layer.units;
            for (int g = 0; g < 4; ++g) {  // i, candidate, f, o
                lp.tensors.push_back(glorot_uniform<S>({d + u, u}, d + u, u, rng));
                lp.tensors.emplace_back(std::vector<int>{u});
            }
            break;
        }
        case Kind::GruCell: {
            const int d = input.size() == 3 ? input[1] * input[2] : input[1];
            const int u = layer.units;
            for (int g = 0; g < 3; ++g) {  // z, r, candidate
                lp.tensors.push_back(glorot_uniform<S>({d, u}, d, u, rng));
                lp.tensors.push_back(glorot_uniform<S>({u, u}, u, u, rng));
                lp.tensors.emplace_back(std::vector<int>{u});
            }
            break;
        }
        case Kind::Residual: {
            std::vector<int> shape = input;
            for (const LayerSpec& l : layer.inner) {
                lp.inner.push_back(init_layer<S>(l, shape, rng));
                shape = infer_output_shape(l, shape);
            }
            break;
        }
        default:
            break;  // parameterless
    }
    return lp;
}

}  // namespace detail

// Glorot-uniform weights, zero biases; layer order fixed so the same seed
// always yields the same parameters.
template <class S>
ParametersT<S> init_parameters_for(const std::vector<LayerSpec>& layers,
                                   const std::vector<int>& input_shape, std::uint64_t seed) {
    Rng rng(seed);
    ParametersT<S> p;
    std::vector<int> shape = input_shape;
    for (const LayerSpec& l : layers) {
        p.layers.push_back(detail::init_layer<S>(l, shape, rng));
        shape = infer_output_shape(l, shape);
    }
    return p;
}

inline Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
    return init_parameters_for<float>(spec.layers, spec.input_shape, seed);
}

}  // namespace histokit::nn
