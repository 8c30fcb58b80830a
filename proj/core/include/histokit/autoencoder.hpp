#pragma once

#include <cstdint>
#include <vector>

#include "histokit/network.hpp"
#include "histokit/optim.hpp"

namespace histokit::filter {

using LatentVector = std::vector<float>;

// Conv+pool encoder down to a latent vector, mirrored dense/upsample/conv
// decoder back to the input shape: decode(encode(x)).shape == x.shape.
struct AutoencoderSpec {
    std::vector<int> input_shape;
    int latent_dim = 32;
    std::vector<nn::LayerSpec> encoder;
    std::vector<nn::LayerSpec> decoder;

    std::vector<nn::LayerSpec> stacked() const;  // encoder followed by decoder
    void validate() const;
};

// Two conv/pool stages, then a linear latent bottleneck; the decoder
// mirrors with nearest-neighbor upsampling. Input sides must be divisible
// by 4.
AutoencoderSpec default_autoencoder(std::vector<int> input_shape, int latent_dim = 32,
                                    int filters = 8);

struct Autoencoder {
    AutoencoderSpec spec;
    nn::Parameters params;
};

// Mean squared reconstruction error of the stacked network on one patch.
double reconstruction_mse(const Autoencoder& ae, const nn::Tensor& patch);

// Per-patch SGD on the MSE reconstruction loss; deterministic given seed.
// Zero epochs returns the freshly initialized weights unchanged.
Autoencoder autoencoder_train(const std::vector<nn::Tensor>& patches, const AutoencoderSpec& spec,
                              const optim::OptimizerConfig& optimizer, int epochs,
                              std::uint64_t seed);

// Deterministic latent embedding (encoder half only).
LatentVector encode(const Autoencoder& ae, const nn::Tensor& patch);

nn::Tensor decode_encode(const Autoencoder& ae, const nn::Tensor& patch);

}  // namespace histokit::filter
