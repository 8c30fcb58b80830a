#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "histokit/layers.hpp"
#include "histokit/params.hpp"
#include "histokit/rng.hpp"
#include "histokit/tensor.hpp"

// Differentiable network kernel. Everything is templated on the scalar so
// the pipeline runs at 32-bit while gradient checks recompute the exact
// same code path at 64-bit.

namespace histokit::nn {

// ---------------------------------------------------------------------------
// Activations

template <class S>
S apply_activation(Activation a, S x) {
    switch (a) {
        case Activation::Linear: return x;
        case Activation::Relu: return x > S(0) ? x : S(0);
        case Activation::Sigmoid: return S(1) / (S(1) + std::exp(-x));
        case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

// d out/d pre, given both the pre-activation and the activated value.
template <class S>
S activation_grad(Activation a, S pre, S post) {
    switch (a) {
        case Activation::Linear: return S(1);
        case Activation::Relu: return pre > S(0) ? S(1) : S(0);
        case Activation::Sigmoid: return post * (S(1) - post);
        case Activation::Tanh: return S(1) - post * post;
    }
    return S(1);
}

template <class S>
void apply_activation_inplace(Activation a, TensorT<S>& t) {
    if (a == Activation::Linear) return;
    for (auto& v : t.data) v = apply_activation(a, v);
}

// Max-subtraction stabilized softmax; output sums to 1.
template <class S>
TensorT<S> softmax(const TensorT<S>& logits) {
    if (logits.size() == 0) throw DimensionError("softmax on empty input");
    TensorT<S> out;
    out.shape = logits.shape;
    out.data.resize(logits.size());
    const S mx = *std::max_element(logits.data.begin(), logits.data.end());
    S sum = S(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.data[i] = std::exp(logits.data[i] - mx);
        sum += out.data[i];
    }
    for (auto& v : out.data) v /= sum;
    return out;
}

// -ln(probs[label]), probs clamped below at 1e-12.
template <class S>
double cross_entropy_loss(const TensorT<S>& probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
        throw DomainError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(probs.size()) + " classes");
    }
    const double p = std::max(static_cast<double>(probs.data[static_cast<std::size_t>(label)]), 1e-12);
    return -std::log(p);
}

// ---------------------------------------------------------------------------
// Standalone layer ops

// Zero-padded "same" convolution: output keeps the input's spatial dims.
// kernels are [k,k,Cin,Cout]; pre-activation optionally captured.
template <class S>
TensorT<S> conv2d_forward(const TensorT<S>& input, const TensorT<S>& kernels,
                          const TensorT<S>& bias, Activation act,
                          TensorT<S>* pre_out = nullptr) {
    if (input.rank() != 3) throw DimensionError("conv2d input must be [H,W,C]");
    if (kernels.rank() != 4 || kernels.shape[0] != kernels.shape[1]) {
        throw DimensionError("conv2d kernels must be [k,k,Cin,Cout]");
    }
    const int k = kernels.shape[0];
    if (k % 2 == 0) throw DimensionError("conv2d kernel size must be odd");
    const int h = input.shape[0], w = input.shape[1], cin = input.shape[2];
    const int cout = kernels.shape[3];
    if (kernels.shape[2] != cin) {
        throw DimensionError("conv2d kernel Cin " + std::to_string(kernels.shape[2]) +
                             " does not match input channels " + std::to_string(cin));
    }
    if (bias.size() != static_cast<std::size_t>(cout)) {
        throw DimensionError("conv2d bias length must equal filter count");
    }
    const int pad = k / 2;
    TensorT<S> pre({h, w, cout});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            S* prow = &pre.data[(static_cast<std::size_t>(y) * w + x) * cout];
            for (int co = 0; co < cout; ++co) prow[co] = bias.data[static_cast<std::size_t>(co)];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = y + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = x + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const S* irow = &input.data[(static_cast<std::size_t>(iy) * w + ix) * cin];
                    const S* krow = &kernels.data[((static_cast<std::size_t>(ky) * k + kx) * cin) * cout];
                    for (int ci = 0; ci < cin; ++ci) {
                        const S a = irow[ci];
                        const S* kk = krow + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) prow[co] += a * kk[co];
                    }
                }
            }
        }
    }
    TensorT<S> out = pre;
    apply_activation_inplace(act, out);
    if (pre_out) *pre_out = std::move(pre);
    return out;
}

// Non-overlapping max pooling with stride == window; trailing remainder
// rows/cols are truncated. argmax_out records, per output cell, the flat
// input index of the maximum (first hit wins on ties).
template <class S>
TensorT<S> maxpool2d_forward(const TensorT<S>& input, int window,
                             std::vector<int>* argmax_out = nullptr) {
    if (input.rank() != 3) throw DimensionError("maxpool2d input must be [H,W,C]");
    const int h = input.shape[0], w = input.shape[1], c = input.shape[2];
    if (window > h || window > w) {
        throw DimensionError("maxpool2d window " + std::to_string(window) + " exceeds input " +
                             shape_to_string(input.shape));
    }
    const int oh = h / window, ow = w / window;
    TensorT<S> out({oh, ow, c});
    if (argmax_out) argmax_out->assign(out.size(), 0);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            for (int ch = 0; ch < c; ++ch) {
                S best{};
                int best_idx = -1;
                for (int ky = 0; ky < window; ++ky) {
                    for (int kx = 0; kx < window; ++kx) {
                        const int iy = oy * window + ky;
                        const int ix = ox * window + kx;
                        const int idx = (iy * w + ix) * c + ch;
                        const S v = input.data[static_cast<std::size_t>(idx)];
                        if (best_idx < 0 || v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                out(oy, ox, ch) = best;
                if (argmax_out) (*argmax_out)[(static_cast<std::size_t>(oy) * ow + ox) * c + ch] = best_idx;
            }
        }
    }
    return out;
}

// activation(W^T x + b) with W stored [in, out].
template <class S>
TensorT<S> dense_forward(const TensorT<S>& input, const TensorT<S>& weights,
                         const TensorT<S>& bias, Activation act,
                         TensorT<S>* pre_out = nullptr) {
    if (weights.rank() != 2) throw DimensionError("dense weights must be [in, out]");
    const int n = weights.shape[0], m = weights.shape[1];
    if (input.size() != static_cast<std::size_t>(n)) {
        throw DimensionError("dense input length " + std::to_string(input.size()) +
                             " does not match weight rows " + std::to_string(n));
    }
    if (bias.size() != static_cast<std::size_t>(m)) {
        throw DimensionError("dense bias length must equal output units");
    }
    TensorT<S> pre({m});
    for (int j = 0; j < m; ++j) pre.data[static_cast<std::size_t>(j)] = bias.data[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
        const S xi = input.data[static_cast<std::size_t>(i)];
        if (xi == S(0)) continue;
        const S* wrow = &weights.data[static_cast<std::size_t>(i) * m];
        for (int j = 0; j < m; ++j) pre.data[static_cast<std::size_t>(j)] += xi * wrow[j];
    }
    TensorT<S> out = pre;
    apply_activation_inplace(act, out);
    if (pre_out) *pre_out = std::move(pre);
    return out;
}

// ---------------------------------------------------------------------------
// Recurrent cells
//
// LSTM follows the gate equations with concatenated [x_t, h_{t-1}] input:
//   i = sig(Wi [x,h] + bi)        candidate = tanh(Wc [x,h] + bc)
//   f = sig(Wf [x,h] + bf)        c_t = i * candidate + f * c_{t-1}
//   o = sig(Wo [x,h] + bo)        h_t = o * tanh(c_t)
// GRU keeps the previous state with weight z:
//   z = sig(Wz x + Uz h + bz)     r = sig(Wr x + Ur h + br)
//   h_t = z * h_{t-1} + (1 - z) * tanh(Wh x + Uh (r * h) + bh)

template <class S>
struct LstmGatesT {
    TensorT<S> input_gate, candidate, forget_gate, output_gate, cell, cell_tanh;
};

template <class S>
struct GruGatesT {
    TensorT<S> update_gate, reset_gate, candidate;
};

// LayerParams order for LstmCell: Wi bi Wc bc Wf bf Wo bo, each W [d+u, u].
template <class S>
std::pair<TensorT<S>, TensorT<S>> lstm_cell_step(const TensorT<S>& x, const TensorT<S>& h_prev,
                                                 const TensorT<S>& c_prev,
                                                 const LayerParamsT<S>& weights,
                                                 LstmGatesT<S>* gates = nullptr) {
    if (weights.tensors.size() != 8) throw DimensionError("lstm weights must hold 8 tensors");
    const int d = static_cast<int>(x.size());
    const int u = weights.tensors[0].shape[1];
    if (weights.tensors[0].shape[0] != d + u) {
        throw DimensionError("lstm weight rows must be input dim + units");
    }
    if (h_prev.size() != static_cast<std::size_t>(u) || c_prev.size() != static_cast<std::size_t>(u)) {
        throw DimensionError("lstm state size must equal units");
    }
    TensorT<S> z({d + u});
    std::copy(x.data.begin(), x.data.end(), z.data.begin());
    std::copy(h_prev.data.begin(), h_prev.data.end(), z.data.begin() + d);

    auto gate = [&](int wi, Activation act) {
        return dense_forward(z, weights.tensors[static_cast<std::size_t>(wi)],
                             weights.tensors[static_cast<std::size_t>(wi) + 1], act);
    };
    TensorT<S> i = gate(0, Activation::Sigmoid);
    TensorT<S> cand = gate(2, Activation::Tanh);
    TensorT<S> f = gate(4, Activation::Sigmoid);
    TensorT<S> o = gate(6, Activation::Sigmoid);

    TensorT<S> c({u}), tanhc({u}), h({u});
    for (int j = 0; j < u; ++j) {
        c(j) = i(j) * cand(j) + f(j) * c_prev(j);
        tanhc(j) = std::tanh(c(j));
        h(j) = o(j) * tanhc(j);
    }
    if (gates) *gates = {i, cand, f, o, c, tanhc};
    return {std::move(h), std::move(c)};
}

// LayerParams order for GruCell: Wz Uz bz Wr Ur br Wh Uh bh; W [d,u], U [u,u].
template <class S>
TensorT<S> gru_cell_step(const TensorT<S>& x, const TensorT<S>& h_prev,
                         const LayerParamsT<S>& weights, GruGatesT<S>* gates = nullptr) {
    if (weights.tensors.size() != 9) throw DimensionError("gru weights must hold 9 tensors");
    const int d = static_cast<int>(x.size());
    const int u = weights.tensors[0].shape[1];
    if (weights.tensors[0].shape[0] != d) throw DimensionError("gru W rows must equal input dim");
    if (h_prev.size() != static_cast<std::size_t>(u)) {
        throw DimensionError("gru state size must equal units");
    }
    auto affine2 = [&](int base, const TensorT<S>& hin) {
        TensorT<S> pre({u});
        const TensorT<S>& W = weights.tensors[static_cast<std::size_t>(base)];
        const TensorT<S>& U = weights.tensors[static_cast<std::size_t>(base) + 1];
        const TensorT<S>& b = weights.tensors[static_cast<std::size_t>(base) + 2];
        for (int j = 0; j < u; ++j) pre(j) = b(j);
        for (int i = 0; i < d; ++i) {
            const S xi = x(i);
            if (xi == S(0)) continue;
            for (int j = 0; j < u; ++j) pre(j) += xi * W(i, j);
        }
        for (int i = 0; i < u; ++i) {
            const S hi = hin(i);
            if (hi == S(0)) continue;
            for (int j = 0; j < u; ++j) pre(j) += hi * U(i, j);
        }
        return pre;
    };

    TensorT<S> zt = affine2(0, h_prev);
    TensorT<S> rt = affine2(3, h_prev);
    for (auto& v : zt.data) v = apply_activation(Activation::Sigmoid, v);
    for (auto& v : rt.data) v = apply_activation(Activation::Sigmoid, v);

    TensorT<S> rh({u});
    for (int j = 0; j < u; ++j) rh(j) = rt(j) * h_prev(j);
    TensorT<S> cand = affine2(6, rh);
    for (auto& v : cand.data) v = std::tanh(v);

    TensorT<S> h({u});
    for (int j = 0; j < u; ++j) h(j) = zt(j) * h_prev(j) + (S(1) - zt(j)) * cand(j);
    if (gates) *gates = {zt, rt, cand};
    return h;
}

// ---------------------------------------------------------------------------
// Forward trace

template <class S>
struct LayerTraceT {
    TensorT<S> input;                 // layer input
    TensorT<S> pre;                   // pre-activation (conv/dense/output logits)
    TensorT<S> output;                // post-activation output
    std::vector<int> argmax;          // maxpool routing
    std::vector<std::uint8_t> mask;   // dropout keep mask (training only)
    std::vector<TensorT<S>> seq;      // recurrent gate stacks, each [T, u]
    std::vector<LayerTraceT<S>> inner;  // residual
};

template <class S>
struct ForwardTraceT {
    std::vector<LayerTraceT<S>> layers;
    bool training = false;
};

using ForwardTrace = ForwardTraceT<float>;

template <class S>
struct ForwardResultT {
    TensorT<S> output;
    ForwardTraceT<S> trace;
};

namespace detail {

template <class S>
TensorT<S> reshaped(const TensorT<S>& t, std::vector<int> shape) {
    TensorT<S> out;
    out.shape = std::move(shape);
    out.data = t.data;
    return out;
}

// Rows of a rank-2/3 tensor as a [T, d] sequence view.
template <class S>
std::pair<int, int> seq_dims_of(const TensorT<S>& t) {
    if (t.rank() == 2) return {t.shape[0], t.shape[1]};
    if (t.rank() == 3) return {t.shape[0], t.shape[1] * t.shape[2]};
    throw DimensionError("recurrent layer needs rank-2 or rank-3 input");
}

template <class S>
TensorT<S> layer_forward(const LayerSpec& layer, const LayerParamsT<S>& lp, const TensorT<S>& input,
                         bool training, Rng* rng, LayerTraceT<S>& tr);

template <class S>
TensorT<S> run_stack(const std::vector<LayerSpec>& layers, const std::vector<LayerParamsT<S>>& lps,
                     const TensorT<S>& input, bool training, Rng* rng,
                     std::vector<LayerTraceT<S>>& traces) {
    if (layers.size() != lps.size()) throw DimensionError("spec/params layer count mismatch");
    traces.clear();
    traces.resize(layers.size());
    TensorT<S> cur = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        cur = layer_forward(layers[i], lps[i], cur, training, rng, traces[i]);
    }
    return cur;
}

template <class S>
TensorT<S> layer_forward(const LayerSpec& layer, const LayerParamsT<S>& lp, const TensorT<S>& input,
                         bool training, Rng* rng, LayerTraceT<S>& tr) {
    using Kind = LayerSpec::Kind;
    tr.input = input;
    switch (layer.kind) {
        case Kind::Conv2D:
            tr.output = conv2d_forward(input, lp.tensors.at(0), lp.tensors.at(1),
                                       layer.activation, &tr.pre);
            return tr.output;
        case Kind::MaxPool2D:
            tr.output = maxpool2d_forward(input, layer.window, &tr.argmax);
            return tr.output;
        case Kind::Dense:
            tr.output = dense_forward(input, lp.tensors.at(0), lp.tensors.at(1),
                                      layer.activation, &tr.pre);
            return tr.output;
        case Kind::Flatten:
            tr.output = reshaped(input, {static_cast<int>(input.size())});
            return tr.output;
        case Kind::Dropout: {
            if (!training || layer.rate == 0.0f) {
                tr.output = input;
                return tr.output;
            }
            if (!rng) throw StateError("dropout in training mode needs an Rng");
            const S keep = S(1) - static_cast<S>(layer.rate);
            tr.mask.resize(input.size());
            tr.output = input;
            for (std::size_t i = 0; i < input.size(); ++i) {
                const bool keep_it = rng->uniform() >= layer.rate;
                tr.mask[i] = keep_it ? 1 : 0;
                tr.output.data[i] = keep_it ? input.data[i] / keep : S(0);  // inverted scaling
            }
            return tr.output;
        }
        case Kind::Residual: {
            TensorT<S> inner_out = run_stack(layer.inner, lp.inner, input, training, rng, tr.inner);
            if (inner_out.shape != input.shape) {
                throw DimensionError("residual inner stack changed shape");
            }
            tr.output = inner_out;
            for (std::size_t i = 0; i < input.size(); ++i) tr.output.data[i] += input.data[i];
            return tr.output;
        }
        case Kind::LstmCell: {
            const auto [steps, d] = seq_dims_of(input);
            const int u = layer.units;
            LayerTraceT<S>& t = tr;
            t.seq.assign(6, TensorT<S>({steps, u}));  // i, cand, f, o, c, tanhc
            t.output = TensorT<S>({steps, u});
            TensorT<S> h({u}), c({u});
            for (int step = 0; step < steps; ++step) {
                TensorT<S> x({d});
                std::copy(input.data.begin() + static_cast<std::size_t>(step) * d,
                          input.data.begin() + static_cast<std::size_t>(step + 1) * d, x.data.begin());
                LstmGatesT<S> g;
                auto [h2, c2] = lstm_cell_step(x, h, c, lp, &g);
                h = std::move(h2);
                c = std::move(c2);
                for (int j = 0; j < u; ++j) {
                    t.seq[0](step, j) = g.input_gate(j);
                    t.seq[1](step, j) = g.candidate(j);
                    t.seq[2](step, j) = g.forget_gate(j);
                    t.seq[3](step, j) = g.output_gate(j);
                    t.seq[4](step, j) = g.cell(j);
                    t.seq[5](step, j) = g.cell_tanh(j);
                    t.output(step, j) = h(j);
                }
            }
            return t.output;
        }
        case Kind::GruCell: {
            const auto [steps, d] = seq_dims_of(input);
            const int u = layer.units;
            tr.seq.assign(3, TensorT<S>({steps, u}));  // z, r, cand
            tr.output = TensorT<S>({steps, u});
            TensorT<S> h({u});
            for (int step = 0; step < steps; ++step) {
                TensorT<S> x({d});
                std::copy(input.data.begin() + static_cast<std::size_t>(step) * d,
                          input.data.begin() + static_cast<std::size_t>(step + 1) * d, x.data.begin());
                GruGatesT<S> g;
                h = gru_cell_step(x, h, lp, &g);
                for (int j = 0; j < u; ++j) {
                    tr.seq[0](step, j) = g.update_gate(j);
                    tr.seq[1](step, j) = g.reset_gate(j);
                    tr.seq[2](step, j) = g.candidate(j);
                    tr.output(step, j) = h(j);
                }
            }
            return tr.output;
        }
        case Kind::SoftmaxOutput: {
            TensorT<S> logits = dense_forward(input, lp.tensors.at(0), lp.tensors.at(1),
                                              Activation::Linear, &tr.pre);
            tr.output = softmax(logits);
            return tr.output;
        }
        case Kind::Upsample2D: {
            const int f = layer.factor;
            const int h = input.shape[0], w = input.shape[1], c = input.shape[2];
            tr.output = TensorT<S>({h * f, w * f, c});
            for (int y = 0; y < h * f; ++y) {
                for (int x = 0; x < w * f; ++x) {
                    const S* src = &input.data[(static_cast<std::size_t>(y / f) * w + x / f) * c];
                    S* dst = &tr.output.data[(static_cast<std::size_t>(y) * (w * f) + x) * c];
                    std::copy(src, src + c, dst);
                }
            }
            return tr.output;
        }
        case Kind::Reshape:
            tr.output = reshaped(input, layer.target_shape);
            return tr.output;
    }
    throw ConfigError("unhandled layer kind");
}

}  // namespace detail

// Generic forward over a layer list (classifiers and autoencoders share it).
template <class S>
ForwardResultT<S> stack_forward(const std::vector<LayerSpec>& layers, const ParametersT<S>& params,
                                const TensorT<S>& input, bool training = false, Rng* rng = nullptr) {
    ForwardResultT<S> res;
    res.trace.training = training;
    res.output = detail::run_stack(layers, params.layers, input, training, rng, res.trace.layers);
    return res;
}

// Classifier forward: validates the input shape and returns the softmax
// distribution. Deterministic when training == false.
template <class S>
ForwardResultT<S> network_forward(const NetworkSpec& spec, const ParametersT<S>& params,
                                  const TensorT<S>& input, bool training = false,
                                  Rng* rng = nullptr) {
    require_shape(input.shape, spec.input_shape, "network_forward input");
    return stack_forward(spec.layers, params, input, training, rng);
}

// ---------------------------------------------------------------------------
// Backward

namespace detail {

template <class S>
std::pair<TensorT<S>, LayerParamsT<S>> layer_backward(const LayerSpec& layer,
                                                      const LayerParamsT<S>& lp,
                                                      const LayerTraceT<S>& tr, TensorT<S> d_out);

// Backward through a dense transform given d(pre); fills dW/db, returns dIn.
template <class S>
TensorT<S> affine_backward(const TensorT<S>& input, const TensorT<S>& W, const TensorT<S>& d_pre,
                           TensorT<S>& dW, TensorT<S>& db) {
    const int n = W.shape[0], m = W.shape[1];
    TensorT<S> d_in(input.shape);
    for (int j = 0; j < m; ++j) db.data[static_cast<std::size_t>(j)] += d_pre.data[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
        const S xi = input.data[static_cast<std::size_t>(i)];
        const S* wrow = &W.data[static_cast<std::size_t>(i) * m];
        S* dwrow = &dW.data[static_cast<std::size_t>(i) * m];
        S acc = S(0);
        for (int j = 0; j < m; ++j) {
            const S g = d_pre.data[static_cast<std::size_t>(j)];
            dwrow[j] += xi * g;
            acc += wrow[j] * g;
        }
        d_in.data[static_cast<std::size_t>(i)] = acc;
    }
    return d_in;
}

template <class S>
std::pair<TensorT<S>, LayerParamsT<S>> conv_backward(const LayerSpec& layer,
                                                     const LayerParamsT<S>& lp,
                                                     const LayerTraceT<S>& tr, const TensorT<S>& d_out) {
    const TensorT<S>& kernels = lp.tensors[0];
    const int k = kernels.shape[0];
    const int pad = k / 2;
    const int h = tr.input.shape[0], w = tr.input.shape[1], cin = tr.input.shape[2];
    const int cout = kernels.shape[3];

    LayerParamsT<S> grads = zero_like(lp);
    TensorT<S>& dK = grads.tensors[0];
    TensorT<S>& dB = grads.tensors[1];
    TensorT<S> d_in(tr.input.shape);

    // d(pre) = d(out) * act'(pre)
    TensorT<S> d_pre(d_out.shape);
    for (std::size_t i = 0; i < d_out.size(); ++i) {
        d_pre.data[i] = d_out.data[i] * activation_grad(layer.activation, tr.pre.data[i], tr.output.data[i]);
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const S* dprow = &d_pre.data[(static_cast<std::size_t>(y) * w + x) * cout];
            for (int co = 0; co < cout; ++co) dB.data[static_cast<std::size_t>(co)] += dprow[co];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = y + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = x + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const S* irow = &tr.input.data[(static_cast<std::size_t>(iy) * w + ix) * cin];
                    S* dirow = &d_in.data[(static_cast<std::size_t>(iy) * w + ix) * cin];
                    const std::size_t kbase = (static_cast<std::size_t>(ky) * k + kx) * cin;
                    for (int ci = 0; ci < cin; ++ci) {
                        const S* kk = &kernels.data[(kbase + ci) * cout];
                        S* dkk = &dK.data[(kbase + ci) * cout];
                        const S a = irow[ci];
                        S acc = S(0);
                        for (int co = 0; co < cout; ++co) {
                            const S g = dprow[co];
                            dkk[co] += a * g;
                            acc += kk[co] * g;
                        }
                        dirow[ci] += acc;
                    }
                }
            }
        }
    }
    return {std::move(d_in), std::move(grads)};
}

template <class S>
std::pair<TensorT<S>, LayerParamsT<S>> lstm_backward(const LayerSpec& layer,
                                                     const LayerParamsT<S>& lp,
                                                     const LayerTraceT<S>& tr, const TensorT<S>& d_out) {
    const auto [steps, d] = seq_dims_of(tr.input);
    const int u = layer.units;
    LayerParamsT<S> grads = zero_like(lp);
    TensorT<S> d_in(tr.input.shape);

    const TensorT<S>& gi = tr.seq[0];
    const TensorT<S>& gc = tr.seq[1];
    const TensorT<S>& gf = tr.seq[2];
    const TensorT<S>& go = tr.seq[3];
    const TensorT<S>& cs = tr.seq[4];
    const TensorT<S>& ct = tr.seq[5];

    TensorT<S> dh_next({u}), dc_next({u});
    for (int step = steps - 1; step >= 0; --step) {
        TensorT<S> dh({u}), dc({u});
        for (int j = 0; j < u; ++j) {
            dh(j) = d_out(step, j) + dh_next(j);
            const S tc = ct(step, j);
            dc(j) = dh(j) * go(step, j) * (S(1) - tc * tc) + dc_next(j);
        }
        // Gate pre-activation gradients.
        TensorT<S> da_i({u}), da_c({u}), da_f({u}), da_o({u});
        for (int j = 0; j < u; ++j) {
            const S c_prev = step > 0 ? cs(step - 1, j) : S(0);
            da_i(j) = dc(j) * gc(step, j) * gi(step, j) * (S(1) - gi(step, j));
            da_c(j) = dc(j) * gi(step, j) * (S(1) - gc(step, j) * gc(step, j));
            da_f(j) = dc(j) * c_prev * gf(step, j) * (S(1) - gf(step, j));
            da_o(j) = dh(j) * ct(step, j) * go(step, j) * (S(1) - go(step, j));
            dc_next(j) = dc(j) * gf(step, j);
        }
        // Shared concat input [x_t, h_{t-1}].
        TensorT<S> z({d + u});
        for (int i = 0; i < d; ++i) z(i) = tr.input.data[static_cast<std::size_t>(step) * d + i];
        for (int j = 0; j < u; ++j) z(d + j) = step > 0 ? tr.output(step - 1, j) : S(0);

        TensorT<S> dz({d + u});
        const TensorT<S>* das[4] = {&da_i, &da_c, &da_f, &da_o};
        for (int g = 0; g < 4; ++g) {
            TensorT<S> dzg = affine_backward(z, lp.tensors[static_cast<std::size_t>(2 * g)], *das[g],
                                             grads.tensors[static_cast<std::size_t>(2 * g)],
                                             grads.tensors[static_cast<std::size_t>(2 * g) + 1]);
            for (int i = 0; i < d + u; ++i) dz(i) += dzg(i);
        }
        for (int i = 0; i < d; ++i) d_in.data[static_cast<std::size_t>(step) * d + i] = dz(i);
        for (int j = 0; j < u; ++j) dh_next(j) = dz(d + j);
    }
    return {std::move(d_in), std::move(grads)};
}

template <class S>
std::pair<TensorT<S>, LayerParamsT<S>> gru_backward(const LayerSpec& layer,
                                                    const LayerParamsT<S>& lp,
                                                    const LayerTraceT<S>& tr, const TensorT<S>& d_out) {
    const auto [steps, d] = seq_dims_of(tr.input);
    const int u = layer.units;
    LayerParamsT<S> grads = zero_like(lp);
    TensorT<S> d_in(tr.input.shape);

    const TensorT<S>& gz = tr.seq[0];
    const TensorT<S>& gr = tr.seq[1];
    const TensorT<S>& gc = tr.seq[2];

    // W [d,u] x-path and U [u,u] h-path gradients for one gate.
    auto backprop_gate = [&](int base, const TensorT<S>& x, const TensorT<S>& hin,
                             const TensorT<S>& da, TensorT<S>& dx, TensorT<S>& dhin) {
        const TensorT<S>& W = lp.tensors[static_cast<std::size_t>(base)];
        const TensorT<S>& U = lp.tensors[static_cast<std::size_t>(base) + 1];
        TensorT<S>& dW = grads.tensors[static_cast<std::size_t>(base)];
        TensorT<S>& dU = grads.tensors[static_cast<std::size_t>(base) + 1];
        TensorT<S>& db = grads.tensors[static_cast<std::size_t>(base) + 2];
        for (int j = 0; j < u; ++j) db(j) += da(j);
        for (int i = 0; i < d; ++i) {
            const S xi = x(i);
            S acc = S(0);
            for (int j = 0; j < u; ++j) {
                dW(i, j) += xi * da(j);
                acc += W(i, j) * da(j);
            }
            dx(i) += acc;
        }
        for (int i = 0; i < u; ++i) {
            const S hi = hin(i);
            S acc = S(0);
            for (int j = 0; j < u; ++j) {
                dU(i, j) += hi * da(j);
                acc += U(i, j) * da(j);
            }
            dhin(i) += acc;
        }
    };

    TensorT<S> dh_next({u});
    for (int step = steps - 1; step >= 0; --step) {
        TensorT<S> x({d});
        for (int i = 0; i < d; ++i) x(i) = tr.input.data[static_cast<std::size_t>(step) * d + i];
        TensorT<S> h_prev({u});
        for (int j = 0; j < u; ++j) h_prev(j) = step > 0 ? tr.output(step - 1, j) : S(0);

        TensorT<S> dh({u});
        for (int j = 0; j < u; ++j) dh(j) = d_out(step, j) + dh_next(j);

        TensorT<S> dz({u}), dcand({u}), dh_prev({u});
        for (int j = 0; j < u; ++j) {
            dz(j) = dh(j) * (h_prev(j) - gc(step, j)) * gz(step, j) * (S(1) - gz(step, j));
            dcand(j) = dh(j) * (S(1) - gz(step, j)) * (S(1) - gc(step, j) * gc(step, j));
            dh_prev(j) = dh(j) * gz(step, j);
        }

        TensorT<S> dx({d});
        // Candidate path: tanh(Wh x + Uh (r*h_prev) + bh).
        TensorT<S> rh({u}), drh({u});
        for (int j = 0; j < u; ++j) rh(j) = gr(step, j) * h_prev(j);
        backprop_gate(6, x, rh, dcand, dx, drh);
        TensorT<S> dr({u});
        for (int j = 0; j < u; ++j) {
            dr(j) = drh(j) * h_prev(j) * gr(step, j) * (S(1) - gr(step, j));
            dh_prev(j) += drh(j) * gr(step, j);
        }
        backprop_gate(0, x, h_prev, dz, dx, dh_prev);
        backprop_gate(3, x, h_prev, dr, dx, dh_prev);

        for (int i = 0; i < d; ++i) d_in.data[static_cast<std::size_t>(step) * d + i] = dx(i);
        dh_next = dh_prev;
    }
    return {std::move(d_in), std::move(grads)};
}

template <class S>
std::pair<TensorT<S>, LayerParamsT<S>> layer_backward(const LayerSpec& layer,
                                                      const LayerParamsT<S>& lp,
                                                      const LayerTraceT<S>& tr, TensorT<S> d_out) {
    using Kind = LayerSpec::Kind;
    switch (layer.kind) {
        case Kind::Conv2D:
            return conv_backward(layer, lp, tr, d_out);
        case Kind::MaxPool2D: {
            TensorT<S> d_in(tr.input.shape);
            for (std::size_t i = 0; i < d_out.size(); ++i) {
                d_in.data[static_cast<std::size_t>(tr.argmax[i])] += d_out.data[i];
            }
            return {std::move(d_in), LayerParamsT<S>{}};
        }
        case Kind::Dense: {
            LayerParamsT<S> grads = zero_like(lp);
            TensorT<S> d_pre(d_out.shape);
            for (std::size_t i = 0; i < d_out.size(); ++i) {
                d_pre.data[i] = d_out.data[i] *
                                activation_grad(layer.activation, tr.pre.data[i], tr.output.data[i]);
            }
            TensorT<S> d_in = affine_backward(tr.input, lp.tensors[0], d_pre, grads.tensors[0],
                                              grads.tensors[1]);
            return {std::move(d_in), std::move(grads)};
        }
        case Kind::Flatten:
            return {reshaped(d_out, tr.input.shape), LayerParamsT<S>{}};
        case Kind::Dropout: {
            if (tr.mask.empty()) return {std::move(d_out), LayerParamsT<S>{}};
            const S keep = S(1) - static_cast<S>(layer.rate);
            TensorT<S> d_in(tr.input.shape);
            for (std::size_t i = 0; i < d_out.size(); ++i) {
                d_in.data[i] = tr.mask[i] ? d_out.data[i] / keep : S(0);
            }
            return {std::move(d_in), LayerParamsT<S>{}};
        }
        case Kind::Residual: {
            LayerParamsT<S> grads;
            grads.inner.resize(layer.inner.size());
            TensorT<S> cur = d_out;
            for (int i = static_cast<int>(layer.inner.size()) - 1; i >= 0; --i) {
                auto [d_prev, g] = layer_backward(layer.inner[static_cast<std::size_t>(i)],
                                                  lp.inner[static_cast<std::size_t>(i)],
                                                  tr.inner[static_cast<std::size_t>(i)], std::move(cur));
                grads.inner[static_cast<std::size_t>(i)] = std::move(g);
                cur = std::move(d_prev);
            }
            for (std::size_t i = 0; i < cur.size(); ++i) cur.data[i] += d_out.data[i];  // skip path
            return {std::move(cur), std::move(grads)};
        }
        case Kind::LstmCell:
            return lstm_backward(layer, lp, tr, d_out);
        case Kind::GruCell:
            return gru_backward(layer, lp, tr, d_out);
        case Kind::SoftmaxOutput: {
            // d(probs) -> d(logits) through the softmax Jacobian.
            const TensorT<S>& p = tr.output;
            S dot = S(0);
            for (std::size_t i = 0; i < p.size(); ++i) dot += d_out.data[i] * p.data[i];
            TensorT<S> d_logits(p.shape);
            for (std::size_t i = 0; i < p.size(); ++i) {
                d_logits.data[i] = p.data[i] * (d_out.data[i] - dot);
            }
            LayerParamsT<S> grads = zero_like(lp);
            TensorT<S> d_in = affine_backward(tr.input, lp.tensors[0], d_logits, grads.tensors[0],
                                              grads.tensors[1]);
            return {std::move(d_in), std::move(grads)};
        }
        case Kind::Upsample2D: {
            const int f = layer.factor;
            const int h = tr.input.shape[0], w = tr.input.shape[1], c = tr.input.shape[2];
            TensorT<S> d_in(tr.input.shape);
            for (int y = 0; y < h * f; ++y) {
                for (int x = 0; x < w * f; ++x) {
                    const S* src = &d_out.data[(static_cast<std::size_t>(y) * (w * f) + x) * c];
                    S* dst = &d_in.data[(static_cast<std::size_t>(y / f) * w + x / f) * c];
                    for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                }
            }
            return {std::move(d_in), LayerParamsT<S>{}};
        }
        case Kind::Reshape:
            return {reshaped(d_out, tr.input.shape), LayerParamsT<S>{}};
    }
    throw ConfigError("unhandled layer kind");
}

}  // namespace detail

template <class S>
struct BackwardResultT {
    ParametersT<S> grads;
    TensorT<S> d_input;
};

// Generic reverse pass from a gradient w.r.t. the stack output (autoencoder
// losses enter here). capture_layer >= 0 additionally records the gradient
// w.r.t. that layer's output (used by grad_cam).
template <class S>
BackwardResultT<S> stack_backward(const std::vector<LayerSpec>& layers, const ParametersT<S>& params,
                                  const ForwardTraceT<S>& trace, TensorT<S> d_output,
                                  int capture_layer = -1, TensorT<S>* captured = nullptr) {
    if (trace.layers.size() != layers.size()) throw StateError("trace does not match spec");
    BackwardResultT<S> res;
    res.grads.layers.resize(layers.size());
    TensorT<S> cur = std::move(d_output);
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        if (i == capture_layer && captured) *captured = cur;
        auto [d_prev, g] = detail::layer_backward(layers[static_cast<std::size_t>(i)],
                                                  params.layers[static_cast<std::size_t>(i)],
                                                  trace.layers[static_cast<std::size_t>(i)],
                                                  std::move(cur));
        res.grads.layers[static_cast<std::size_t>(i)] = std::move(g);
        cur = std::move(d_prev);
    }
    res.d_input = std::move(cur);
    return res;
}

// Exact cross-entropy gradients for a classifier forward trace. Starts from
// the closed-form softmax-CE logit gradient probs - onehot(label).
template <class S>
ParametersT<S> network_backward(const NetworkSpec& spec, const ParametersT<S>& params,
                                const ForwardTraceT<S>& trace, int label,
                                int capture_layer = -1, TensorT<S>* captured = nullptr,
                                TensorT<S>* logit_grad_override = nullptr) {
    if (trace.layers.size() != spec.layers.size() || trace.layers.empty()) {
        throw StateError("trace does not match spec");
    }
    const std::size_t last = spec.layers.size() - 1;
    if (spec.layers[last].kind != LayerSpec::Kind::SoftmaxOutput) {
        throw ConfigError("network_backward expects a softmax_output head");
    }
    const TensorT<S>& probs = trace.layers[last].output;
    TensorT<S> d_logits;
    if (logit_grad_override) {
        d_logits = *logit_grad_override;
    } else {
        if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
            throw DomainError("label out of range");
        }
        d_logits = probs;
        d_logits.data[static_cast<std::size_t>(label)] -= S(1);
    }

    ParametersT<S> grads;
    grads.layers.resize(spec.layers.size());
    LayerParamsT<S> head = zero_like(params.layers[last]);
    TensorT<S> cur = detail::affine_backward(trace.layers[last].input, params.layers[last].tensors[0],
                                             d_logits, head.tensors[0], head.tensors[1]);
    grads.layers[last] = std::move(head);

    for (int i = static_cast<int>(last) - 1; i >= 0; --i) {
        if (i == capture_layer && captured) *captured = cur;
        auto [d_prev, g] = detail::layer_backward(spec.layers[static_cast<std::size_t>(i)],
                                                  params.layers[static_cast<std::size_t>(i)],
                                                  trace.layers[static_cast<std::size_t>(i)],
                                                  std::move(cur));
        grads.layers[static_cast<std::size_t>(i)] = std::move(g);
        cur = std::move(d_prev);
    }
    return grads;
}

// Residual block as a standalone op: inner stack output + skip connection.
template <class S>
TensorT<S> residual_block_forward(const TensorT<S>& input, const std::vector<LayerSpec>& inner_layers,
                                  const ParametersT<S>& inner_params) {
    std::vector<LayerTraceT<S>> traces;
    TensorT<S> out = detail::run_stack(inner_layers, inner_params.layers, input, false, nullptr, traces);
    if (out.shape != input.shape) throw DimensionError("residual inner stack changed shape");
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += input.data[i];
    return out;
}

// ---------------------------------------------------------------------------
// Grad-CAM

// Bilinear, corner-aligned upsample of a [H,W] map.
template <class S>
TensorT<S> upsample_bilinear_2d(const TensorT<S>& map, int out_h, int out_w) {
    const int h = map.shape[0], w = map.shape[1];
    TensorT<S> out({out_h, out_w});
    for (int y = 0; y < out_h; ++y) {
        const double sy = out_h > 1 ? double(y) * (h - 1) / (out_h - 1) : (h - 1) / 2.0;
        const int y0 = std::min(static_cast<int>(sy), h - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double sx = out_w > 1 ? double(x) * (w - 1) / (out_w - 1) : (w - 1) / 2.0;
            const int x0 = std::min(static_cast<int>(sx), w - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;
            const double v = (1 - fy) * ((1 - fx) * map(y0, x0) + fx * map(y0, x1)) +
                             fy * ((1 - fx) * map(y1, x0) + fx * map(y1, x1));
            out(y, x) = static_cast<S>(v);
        }
    }
    return out;
}

// Mean-gradient channel weighting of the last conv feature maps for the
// target class logit; ReLU, bilinear upsample to input dims, min-max
// normalized to [0,1]. An all-zero map stays all-zero.
template <class S>
TensorT<S> grad_cam(const NetworkSpec& spec, const ParametersT<S>& params, const TensorT<S>& input,
                    int target_class) {
    // Last top-level layer producing conv feature maps (a conv itself, or a
    // residual block that contains one).
    int feat_layer = -1;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind == LayerSpec::Kind::Conv2D) feat_layer = static_cast<int>(i);
        if (l.kind == LayerSpec::Kind::Residual) {
            for (const LayerSpec& in : l.inner) {
                if (in.kind == LayerSpec::Kind::Conv2D) {
                    feat_layer = static_cast<int>(i);
                    break;
                }
            }
        }
    }
    if (feat_layer < 0) throw ConfigError("grad_cam needs at least one conv2d layer");

    ForwardResultT<S> fwd = network_forward(spec, params, input);
    const int classes = static_cast<int>(fwd.output.size());
    if (target_class < 0 || target_class >= classes) throw DomainError("target class out of range");

    // Gradient of the target logit (not the probability).
    TensorT<S> d_logits({classes});
    d_logits.data[static_cast<std::size_t>(target_class)] = S(1);
    TensorT<S> d_feat;
    network_backward(spec, params, fwd.trace, /*label=*/0, feat_layer, &d_feat, &d_logits);

    const TensorT<S>& feat = fwd.trace.layers[static_cast<std::size_t>(feat_layer)].output;
    const int fh = feat.shape[0], fw = feat.shape[1], fc = feat.shape[2];

    std::vector<double> weight(static_cast<std::size_t>(fc), 0.0);
    for (int c = 0; c < fc; ++c) {
        double sum = 0.0;
        for (int y = 0; y < fh; ++y)
            for (int x = 0; x < fw; ++x) sum += static_cast<double>(d_feat(y, x, c));
        weight[static_cast<std::size_t>(c)] = sum / (double(fh) * fw);
    }

    TensorT<S> cam({fh, fw});
    for (int y = 0; y < fh; ++y) {
        for (int x = 0; x < fw; ++x) {
            double v = 0.0;
            for (int c = 0; c < fc; ++c) v += weight[static_cast<std::size_t>(c)] * feat(y, x, c);
            cam(y, x) = v > 0.0 ? static_cast<S>(v) : S(0);
        }
    }

    TensorT<S> up = upsample_bilinear_2d(cam, spec.input_shape[0], spec.input_shape[1]);
    const S mx = *std::max_element(up.data.begin(), up.data.end());
    const S mn = *std::min_element(up.data.begin(), up.data.end());
    if (mx <= S(0)) {
        up.fill(S(0));
    } else if (mx - mn == S(0)) {
        up.fill(S(1));
    } else {
        for (auto& v : up.data) v = (v - mn) / (mx - mn);
    }
    return up;
}

}  // namespace histokit::nn
