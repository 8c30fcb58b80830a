#pragma once

#include <cstddef>
#include <vector>

#include "histokit/error.hpp"
#include "histokit/tensor.hpp"

namespace histokit::nn {

using histokit::Tensor;
using histokit::Tensor64;
using histokit::TensorT;

enum class Activation { Linear, Relu, Sigmoid, Tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// One layer of a network. Conv/pool/dense/flatten/dropout/residual,
// recurrent cells for row-sequence classification, a combined
// dense+softmax output head, and the upsample/reshape pair used by
// autoencoder decoders.
struct LayerSpec {
    enum class Kind {
        Conv2D,
        MaxPool2D,
        Dense,
        Flatten,
        Dropout,
        Residual,
        LstmCell,
        GruCell,
        SoftmaxOutput,
        Upsample2D,
        Reshape,
    };

    Kind kind = Kind::Flatten;
    int filters = 0;       // Conv2D
    int kernel_size = 0;   // Conv2D
    int window = 0;        // MaxPool2D
    int units = 0;         // Dense, LstmCell, GruCell
    int classes = 0;       // SoftmaxOutput
    int factor = 0;        // Upsample2D
    float rate = 0.0f;     // Dropout
    Activation activation = Activation::Linear;
    std::vector<int> target_shape;   // Reshape
    std::vector<LayerSpec> inner;    // Residual

    static LayerSpec conv2d(int filters, int kernel_size, Activation act);
    static LayerSpec maxpool2d(int window);
    static LayerSpec dense(int units, Activation act);
    static LayerSpec flatten();
    static LayerSpec dropout(float rate);
    static LayerSpec residual(std::vector<LayerSpec> inner);
    static LayerSpec lstm_cell(int units);
    static LayerSpec gru_cell(int units);
    static LayerSpec softmax_output(int classes);
    static LayerSpec upsample2d(int factor);
    static LayerSpec reshape(std::vector<int> target_shape);
};

const char* layer_kind_name(LayerSpec::Kind k);

// Declarative network: input shape plus ordered layers. Classifiers must
// end in SoftmaxOutput (validate_classifier); autoencoders reuse the same
// layer machinery through their own spec type.
struct NetworkSpec {
    std::vector<int> input_shape;
    std::vector<LayerSpec> layers;
};

// Output shape of a single layer. Throws DimensionError when the layer
// cannot accept the input shape.
std::vector<int> infer_output_shape(const LayerSpec& layer, const std::vector<int>& input);

// Shapes after each layer; result[i] is the output of layers[i].
std::vector<std::vector<int>> infer_layer_shapes(const std::vector<LayerSpec>& layers,
                                                 const std::vector<int>& input);

// Trainable parameter count of one layer given its input shape.
std::size_t layer_parameter_count(const LayerSpec& layer, const std::vector<int>& input);

std::size_t network_parameter_count(const NetworkSpec& spec);

// Enforces the classifier invariants: non-empty, last layer SoftmaxOutput,
// every layer's input shape derivable from its predecessor.
void validate_classifier(const NetworkSpec& spec);

}  // namespace histokit::nn
