#include "histokit/hmic.hpp"

#include <algorithm>
#include <cmath>

namespace histokit::hmic {

using nn::Activation;
using nn::LayerSpec;

nn::NetworkSpec make_parent_network(int input_size, int classes, int base_filters,
                                    int dense_units, int pool_window) {
    nn::NetworkSpec net;
    net.input_shape = {input_size, input_size, 3};
    net.layers = {
        LayerSpec::conv2d(base_filters, 3, Activation::Relu),
        LayerSpec::maxpool2d(pool_window),
        LayerSpec::conv2d(base_filters, 3, Activation::Relu),
        LayerSpec::maxpool2d(pool_window),
        LayerSpec::conv2d(base_filters * 2, 3, Activation::Relu),
        LayerSpec::maxpool2d(pool_window),
        LayerSpec::flatten(),
        LayerSpec::dense(dense_units, Activation::Relu),
        LayerSpec::softmax_output(classes),
    };
    nn::validate_classifier(net);
    return net;
}

nn::NetworkSpec make_child_network(int input_size, int classes, int base_filters, int dense_units,
                                   int pool_window, float dropout_rate) {
    nn::NetworkSpec net;
    net.input_shape = {input_size, input_size, 3};
    net.layers = {
        LayerSpec::conv2d(base_filters, 3, Activation::Relu),
        LayerSpec::maxpool2d(pool_window),
        LayerSpec::conv2d(base_filters, 3, Activation::Relu),
        LayerSpec::maxpool2d(pool_window),
        LayerSpec::conv2d(base_filters * 2, 3, Activation::Relu),
        LayerSpec::maxpool2d(pool_window),
        LayerSpec::flatten(),
        LayerSpec::dense(dense_units, Activation::Relu),
        LayerSpec::dropout(dropout_rate),
        LayerSpec::softmax_output(classes),
    };
    nn::validate_classifier(net);
    return net;
}

int HierarchyConfig::routed_parent_index() const {
    for (std::size_t i = 0; i < parent_labels.size(); ++i) {
        if (parent_labels[i] == routed_parent) return static_cast<int>(i);
    }
    throw ConfigError("routed parent '" + routed_parent + "' not in parent labels");
}

void HierarchyConfig::validate() const {
    if (parent_labels.empty() || child_labels.empty()) {
        throw ConfigError("hierarchy label sets must be non-empty");
    }
    routed_parent_index();
    for (const auto& p : parent_labels) {
        for (const auto& c : child_labels) {
            if (p == c) throw ConfigError("parent and child label sets overlap at '" + p + "'");
        }
    }
    if (parent_input_size < 1 || child_input_size < 1) {
        throw ConfigError("hierarchy input sizes must be positive");
    }
}

PatchClassifier make_network_classifier(const TrainedModel& model) {
    if (model.params.layers.empty()) throw StateError("classifier model has no parameters");
    // Copy spec+params into the closure so the classifier owns its model.
    return [model](const img::RgbImage& image) {
        const int side = model.spec.input_shape[0];
        const img::RgbImage resized = img::resize_bilinear(image, side, side);
        auto fwd = nn::network_forward(model.spec, model.params, img::image_to_tensor(resized));
        return fwd.output.data;
    };
}

int patch_map_label(const std::vector<float>& probs) {
    if (probs.empty()) throw DomainError("empty probability vector");
    double sum = 0.0;
    for (const float p : probs) {
        if (p < 0.0f) throw DomainError("probability vector has negative entries");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) throw DomainError("probability vector does not sum to 1");
    return train::argmax_lowest(probs);
}

HmicPrediction hmic_predict_patch(const HierarchyConfig& config, const HierarchyModels& models,
                                  const img::RgbImage& patch) {
    config.validate();
    if (!models.parent) throw StateError("parent model is not trained");

    HmicPrediction out;
    const img::RgbImage balanced = img::color_balance(patch, config.parent_balance);
    out.parent_probs = models.parent(balanced);
    if (out.parent_probs.size() != config.parent_labels.size()) {
        throw DimensionError("parent classifier output size does not match parent labels");
    }
    out.parent_label = patch_map_label(out.parent_probs);

    if (out.parent_label == config.routed_parent_index()) {
        if (!models.child) throw StateError("child model is not trained");
        const img::RgbImage normalized = img::stain_normalize(patch, config.child_stain);
        out.child_probs = models.child(normalized);
        if (out.child_probs.size() != config.child_labels.size()) {
            throw DimensionError("child classifier output size does not match child labels");
        }
        out.child_label = patch_map_label(out.child_probs);
    }
    return out;
}

SlidePrediction aggregate_slide(const std::vector<PatchPrediction>& patch_predictions) {
    if (patch_predictions.empty()) throw DomainError("aggregate_slide on empty slide");
    const std::size_t classes = patch_predictions[0].probs.size();
    SlidePrediction out;
    out.slide_id = patch_predictions[0].slide_id;
    out.sums.assign(classes, 0.0);
    for (const PatchPrediction& p : patch_predictions) {
        if (p.probs.size() != classes) throw DimensionError("patch predictions mix label sets");
        for (std::size_t c = 0; c < classes; ++c) out.sums[c] += p.probs[c];
    }
    out.patch_count = static_cast<int>(patch_predictions.size());
    int best = 0;
    for (int c = 1; c < static_cast<int>(classes); ++c) {
        if (out.sums[static_cast<std::size_t>(c)] > out.sums[static_cast<std::size_t>(best)]) best = c;
    }
    out.label = best;
    return out;
}

namespace {

train::Dataset build_level_dataset(const LabeledImages& data, int input_size,
                                   const std::function<img::RgbImage(const img::RgbImage&)>& prep) {
    train::Dataset ds;
    ds.inputs.reserve(data.images.size());
    ds.labels = data.labels;
    for (const img::RgbImage& im : data.images) {
        const img::RgbImage prepped = prep(im);
        ds.inputs.push_back(img::image_to_tensor(img::resize_bilinear(prepped, input_size, input_size)));
    }
    return ds;
}

}  // namespace

HierarchyModels TrainedHierarchy::models() const {
    HierarchyModels m;
    m.parent = make_network_classifier(parent);
    m.child = make_network_classifier(child);
    return m;
}

TrainedHierarchy hmic_train(const HierarchyConfig& config, const LabeledImages& parent_dataset,
                            const LabeledImages& child_dataset, const HmicTrainParams& params) {
    config.validate();
    if (parent_dataset.images.empty()) throw ConfigError("parent dataset is empty");
    if (child_dataset.images.empty()) {
        throw ConfigError("child dataset is empty; the routing target is untrainable");
    }
    if (parent_dataset.images.size() != parent_dataset.labels.size() ||
        child_dataset.images.size() != child_dataset.labels.size()) {
        throw DimensionError("dataset images/labels mismatch");
    }
    for (const int l : parent_dataset.labels) {
        if (l < 0 || l >= static_cast<int>(config.parent_labels.size())) {
            throw DomainError("parent dataset label out of range");
        }
    }
    for (const int l : child_dataset.labels) {
        if (l < 0 || l >= static_cast<int>(config.child_labels.size())) {
            throw DomainError("child dataset label out of range");
        }
    }

    TrainedHierarchy trained;
    trained.config = config;

    // Parent level: every patch at every balance level.
    {
        train::Dataset ds;
        for (const double level : params.parent_balance_levels) {
            const img::ColorBalanceParams balance = img::balance_level_params(level);
            train::Dataset part = build_level_dataset(
                parent_dataset, config.parent_input_size,
                [&](const img::RgbImage& im) { return img::color_balance(im, balance); });
            ds.inputs.insert(ds.inputs.end(), part.inputs.begin(), part.inputs.end());
            ds.labels.insert(ds.labels.end(), part.labels.begin(), part.labels.end());
        }
        trained.parent.spec = make_parent_network(config.parent_input_size,
                                                  static_cast<int>(config.parent_labels.size()),
                                                  params.parent_filters, params.dense_units,
                                                  params.pool_window);
        trained.parent.params =
            nn::init_parameters(trained.parent.spec, stage_seed(params.seed, "hmic-parent"));
        train::TrainOptions opts;
        opts.optimizer = params.parent_optimizer;
        opts.epochs = params.parent_epochs;
        opts.seed = stage_seed(params.seed, "hmic-parent-train");
        trained.parent_history =
            train::train_classifier(trained.parent.spec, trained.parent.params, ds, opts);
    }

    // Child level: stain-normalized routed patches.
    {
        train::Dataset ds = build_level_dataset(
            child_dataset, config.child_input_size,
            [&](const img::RgbImage& im) { return img::stain_normalize(im, config.child_stain); });
        trained.child.spec = make_child_network(config.child_input_size,
                                                static_cast<int>(config.child_labels.size()),
                                                params.child_filters, params.dense_units,
                                                params.pool_window);
        trained.child.params =
            nn::init_parameters(trained.child.spec, stage_seed(params.seed, "hmic-child"));
        train::TrainOptions opts;
        opts.optimizer = params.child_optimizer;
        opts.epochs = params.child_epochs;
        opts.seed = stage_seed(params.seed, "hmic-child-train");
        trained.child_history =
            train::train_classifier(trained.child.spec, trained.child.params, ds, opts);
    }
    return trained;
}

std::string joint_label(const HierarchyConfig& config, int parent_label,
                        std::optional<int> child_label) {
    std::string out = config.parent_labels.at(static_cast<std::size_t>(parent_label));
    if (child_label) {
        out += "/" + config.child_labels.at(static_cast<std::size_t>(*child_label));
    }
    return out;
}

}  // namespace histokit::hmic
