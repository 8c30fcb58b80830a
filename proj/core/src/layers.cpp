#include "histokit/layers.hpp"

#include <numeric>
#include <string>

namespace histokit::nn {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "linear";
}

Activation activation_from_name(const std::string& name) {
    if (name == "linear") return Activation::Linear;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation: " + name);
}

const char* layer_kind_name(LayerSpec::Kind k) {
    switch (k) {
        case LayerSpec::Kind::Conv2D: return "conv2d";
        case LayerSpec::Kind::MaxPool2D: return "maxpool2d";
        case LayerSpec::Kind::Dense: return "dense";
        case LayerSpec::Kind::Flatten: return "flatten";
        case LayerSpec::Kind::Dropout: return "dropout";
        case LayerSpec::Kind::Residual: return "residual";
        case LayerSpec::Kind::LstmCell: return "lstm";
        case LayerSpec::Kind::GruCell: return "gru";
        case LayerSpec::Kind::SoftmaxOutput: return "softmax_output";
        case LayerSpec::Kind::Upsample2D: return "upsample2d";
        case LayerSpec::Kind::Reshape: return "reshape";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(int filters, int kernel_size, Activation act) {
    if (filters < 1) throw ConfigError("conv2d: filters must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw ConfigError("conv2d: kernel_size must be odd and >= 1");
    }
    LayerSpec l;
    l.kind = Kind::Conv2D;
    l.filters = filters;
    l.kernel_size = kernel_size;
    l.activation = act;
    return l;
}

LayerSpec LayerSpec::maxpool2d(int window) {
    if (window < 1) throw ConfigError("maxpool2d: window must be >= 1");
    LayerSpec l;
    l.kind = Kind::MaxPool2D;
    l.window = window;
    return l;
}

LayerSpec LayerSpec::dense(int units, Activation act) {
    if (units < 1) throw ConfigError("dense: units must be >= 1");
    LayerSpec l;
    l.kind = Kind::Dense;
    l.units = units;
    l.activation = act;
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = Kind::Flatten;
    return l;
}

LayerSpec LayerSpec::dropout(float rate) {
    if (rate < 0.0f || rate >= 1.0f) throw ConfigError("dropout: rate must be in [0, 1)");
    LayerSpec l;
    l.kind = Kind::Dropout;
    l.rate = rate;
    return l;
}

LayerSpec LayerSpec::residual(std::vector<LayerSpec> inner) {
    LayerSpec l;
    l.kind = Kind::Residual;
    l.inner = std::move(inner);
    return l;
}

LayerSpec LayerSpec::lstm_cell(int units) {
    if (units < 1) throw ConfigError("lstm: units must be >= 1");
    LayerSpec l;
    l.kind = Kind::LstmCell;
    l.units = units;
    return l;
}

LayerSpec LayerSpec::gru_cell(int units) {
    if (units < 1) throw ConfigError("gru: units must be >= 1");
    LayerSpec l;
    l.kind = Kind::GruCell;
    l.units = units;
    return l;
}

LayerSpec LayerSpec::softmax_output(int classes) {
    if (classes < 1) throw ConfigError("softmax_output: classes must be >= 1");
    LayerSpec l;
    l.kind = Kind::SoftmaxOutput;
    l.classes = classes;
    return l;
}

LayerSpec LayerSpec::upsample2d(int factor) {
    if (factor < 1) throw ConfigError("upsample2d: factor must be >= 1");
    LayerSpec l;
    l.kind = Kind::Upsample2D;
    l.factor = factor;
    return l;
}

LayerSpec LayerSpec::reshape(std::vector<int> target_shape) {
    LayerSpec l;
    l.kind = Kind::Reshape;
    l.target_shape = std::move(target_shape);
    return l;
}

namespace {

// Recurrent layers consume either a [T, d] sequence or an image [H, W, C]
// read as one row per timestep.
std::pair<int, int> sequence_dims(const std::vector<int>& input) {
    if (input.size() == 2) return {input[0], input[1]};
    if (input.size() == 3) return {input[0], input[1] * input[2]};
    throw DimensionError("recurrent layer needs rank-2 or rank-3 input, got " +
                         shape_to_string(input));
}

int flat_size(const std::vector<int>& input) {
    return static_cast<int>(shape_size(input));
}

}  // namespace

std::vector<int> infer_output_shape(const LayerSpec& layer, const std::vector<int>& input) {
    using Kind = LayerSpec::Kind;
    switch (layer.kind) {
        case Kind::Conv2D: {
            if (input.size() != 3) {
                throw DimensionError("conv2d needs [H,W,C] input, got " + shape_to_string(input));
            }
            return {input[0], input[1], layer.filters};
        }
        case Kind::MaxPool2D: {
            if (input.size() != 3) {
                throw DimensionError("maxpool2d needs [H,W,C] input, got " + shape_to_string(input));
            }
            if (layer.window > input[0] || layer.window > input[1]) {
                throw DimensionError("maxpool2d window " + std::to_string(layer.window) +
                                     " exceeds input " + shape_to_string(input));
            }
            // Trailing remainder rows/cols are truncated.
            return {input[0] / layer.window, input[1] / layer.window, input[2]};
        }
        case Kind::Dense: {
            if (input.size() != 1) {
                throw DimensionError("dense needs rank-1 input, got " + shape_to_string(input) +
                                     " (insert flatten)");
            }
            return {layer.units};
        }
        case Kind::Flatten:
            return {flat_size(input)};
        case Kind::Dropout:
            return input;
        case Kind::Residual: {
            std::vector<int> shape = input;
            for (const LayerSpec& l : layer.inner) shape = infer_output_shape(l, shape);
            if (shape != input) {
                throw DimensionError("residual inner stack maps " + shape_to_string(input) +
                                     " to " + shape_to_string(shape) + "; must preserve shape");
            }
            return input;
        }
        case Kind::LstmCell:
        case Kind::GruCell: {
            const auto [t, d] = sequence_dims(input);
            (void)d;
            return {t, layer.units};
        }
        case Kind::SoftmaxOutput: {
            if (input.size() != 1) {
                throw DimensionError("softmax_output needs rank-1 input, got " +
                                     shape_to_string(input) + " (insert flatten)");
            }
            return {layer.classes};
        }
        case Kind::Upsample2D: {
            if (input.size() != 3) {
                throw DimensionError("upsample2d needs [H,W,C] input, got " + shape_to_string(input));
            }
            return {input[0] * layer.factor, input[1] * layer.factor, input[2]};
        }
        case Kind::Reshape: {
            if (shape_size(layer.target_shape) != shape_size(input)) {
                throw DimensionError("reshape " + shape_to_string(input) + " -> " +
                                     shape_to_string(layer.target_shape) + " changes element count");
            }
            return layer.target_shape;
        }
    }
    throw ConfigError("unhandled layer kind");
}

std::vector<std::vector<int>> infer_layer_shapes(const std::vector<LayerSpec>& layers,
                                                 const std::vector<int>& input) {
    std::vector<std::vector<int>> shapes;
    shapes.reserve(layers.size());
    std::vector<int> cur = input;
    for (const LayerSpec& l : layers) {
        cur = infer_output_shape(l, cur);
        shapes.push_back(cur);
    }
    return shapes;
}

std::size_t layer_parameter_count(const LayerSpec& layer, const std::vector<int>& input) {
    using Kind = LayerSpec::Kind;
    switch (layer.kind) {
        case Kind::Conv2D: {
            const std::size_t k = static_cast<std::size_t>(layer.kernel_size);
            return k * k * static_cast<std::size_t>(input[2]) * layer.filters +
                   static_cast<std::size_t>(layer.filters);
        }
        case Kind::Dense:
            return static_cast<std::size_t>(input[0]) * layer.units +
                   static_cast<std::size_t>(layer.units);
        case Kind::SoftmaxOutput:
            return static_cast<std::size_t>(input[0]) * layer.classes +
                   static_cast<std::size_t>(layer.classes);
        case Kind::LstmCell: {
            const auto [t, d] = sequence_dims(input);
            (void)t;
            const std::size_t u = static_cast<std::size_t>(layer.units);
            return 4 * ((static_cast<std::size_t>(d) + u) * u + u);  // W[x,h] + b per gate
        }
        case Kind::GruCell: {
            const auto [t, d] = sequence_dims(input);
            (void)t;
            const std::size_t u = static_cast<std::size_t>(layer.units);
            return 3 * (static_cast<std::size_t>(d) * u + u * u + u);  // W, U, b per gate
        }
        case Kind::Residual: {
            std::size_t n = 0;
            std::vector<int> shape = input;
            for (const LayerSpec& l : layer.inner) {
                n += layer_parameter_count(l, shape);
                shape = infer_output_shape(l, shape);
            }
            return n;
        }
        default:
            return 0;
    }
}

std::size_t network_parameter_count(const NetworkSpec& spec) {
    std::size_t n = 0;
    std::vector<int> shape = spec.input_shape;
    for (const LayerSpec& l : spec.layers) {
        n += layer_parameter_count(l, shape);
        shape = infer_output_shape(l, shape);
    }
    return n;
}

void validate_classifier(const NetworkSpec& spec) {
    if (spec.layers.empty()) throw ConfigError("network has no layers");
    if (spec.layers.back().kind != LayerSpec::Kind::SoftmaxOutput) {
        throw ConfigError("classifier must end in softmax_output");
    }
    infer_layer_shapes(spec.layers, spec.input_shape);  // throws on any mismatch
}

}  // namespace histokit::nn
