#include "histokit/autoencoder.hpp"

#include <numeric>

namespace histokit::filter {

using nn::Activation;
using nn::LayerSpec;

std::vector<LayerSpec> AutoencoderSpec::stacked() const {
    std::vector<LayerSpec> all = encoder;
    all.insert(all.end(), decoder.begin(), decoder.end());
    return all;
}

void AutoencoderSpec::validate() const {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (encoder.empty() || decoder.empty()) throw ConfigError("autoencoder needs encoder and decoder layers");
    const auto enc_shapes = nn::infer_layer_shapes(encoder, input_shape);
    if (enc_shapes.back() != std::vector<int>{latent_dim}) {
        throw ConfigError("encoder must end in a [latent_dim] vector");
    }
    const auto dec_shapes = nn::infer_layer_shapes(decoder, enc_shapes.back());
    if (dec_shapes.back() != input_shape) {
        throw ConfigError("decoder must map the latent back to the input shape");
    }
}

AutoencoderSpec default_autoencoder(std::vector<int> input_shape, int latent_dim, int filters) {
    if (input_shape.size() != 3) throw ConfigError("autoencoder input must be [H,W,C]");
    const int h = input_shape[0], w = input_shape[1], c = input_shape[2];
    if (h % 4 != 0 || w % 4 != 0) throw ConfigError("autoencoder input sides must be divisible by 4");
    AutoencoderSpec spec;
    spec.input_shape = input_shape;
    spec.latent_dim = latent_dim;
    spec.encoder = {
        LayerSpec::conv2d(filters, 3, Activation::Relu),
        LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(filters, 3, Activation::Relu),
        LayerSpec::maxpool2d(2),
        LayerSpec::flatten(),
        LayerSpec::dense(latent_dim, Activation::Linear),
    };
    const int hq = h / 4, wq = w / 4;
    spec.decoder = {
        LayerSpec::dense(hq * wq * filters, Activation::Relu),
        LayerSpec::reshape({hq, wq, filters}),
        LayerSpec::upsample2d(2),
        LayerSpec::conv2d(filters, 3, Activation::Relu),
        LayerSpec::upsample2d(2),
        LayerSpec::conv2d(c, 3, Activation::Sigmoid),
    };
    spec.validate();
    return spec;
}

double reconstruction_mse(const Autoencoder& ae, const nn::Tensor& patch) {
    auto fwd = nn::stack_forward(ae.spec.stacked(), ae.params, patch);
    double mse = 0.0;
    for (std::size_t i = 0; i < patch.size(); ++i) {
        const double d = static_cast<double>(fwd.output.data[i]) - patch.data[i];
        mse += d * d;
    }
    return mse / static_cast<double>(patch.size());
}

Autoencoder autoencoder_train(const std::vector<nn::Tensor>& patches, const AutoencoderSpec& spec,
                              const optim::OptimizerConfig& optimizer, int epochs,
                              std::uint64_t seed) {
    if (patches.empty()) throw ConfigError("autoencoder_train needs at least one patch");
    spec.validate();
    for (const auto& p : patches) {
        require_shape(p.shape, spec.input_shape, "autoencoder_train patch");
    }

    Autoencoder ae;
    ae.spec = spec;
    const std::vector<LayerSpec> stacked = spec.stacked();
    ae.params = nn::init_parameters_for<float>(stacked, spec.input_shape, stage_seed(seed, "ae-init"));
    if (epochs <= 0) return ae;

    optim::OptimizerState opt = optim::make_optimizer_state(optimizer, ae.params);
    Rng shuffle_rng(stage_seed(seed, "ae-shuffle"));

    std::vector<int> order(patches.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (const int idx : order) {
            const nn::Tensor& x = patches[static_cast<std::size_t>(idx)];
            auto fwd = nn::stack_forward(stacked, ae.params, x, /*training=*/true, &shuffle_rng);
            nn::Tensor d_out(x.shape);
            const float scale = 2.0f / static_cast<float>(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                d_out.data[i] = scale * (fwd.output.data[i] - x.data[i]);
            }
            auto bwd = nn::stack_backward(stacked, ae.params, fwd.trace, std::move(d_out));
            optim::optimizer_step(ae.params, bwd.grads, opt);
        }
    }
    return ae;
}

LatentVector encode(const Autoencoder& ae, const nn::Tensor& patch) {
    require_shape(patch.shape, ae.spec.input_shape, "encode patch");
    nn::ParametersT<float> enc_params;
    enc_params.layers.assign(ae.params.layers.begin(),
                             ae.params.layers.begin() + static_cast<std::ptrdiff_t>(ae.spec.encoder.size()));
    auto fwd = nn::stack_forward(ae.spec.encoder, enc_params, patch);
    return fwd.output.data;
}

nn::Tensor decode_encode(const Autoencoder& ae, const nn::Tensor& patch) {
    auto fwd = nn::stack_forward(ae.spec.stacked(), ae.params, patch);
    return fwd.output;
}

}  // namespace histokit::filter
