#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "histokit/preprocess.hpp"
#include "histokit/train.hpp"

namespace histokit::hmic {

// Parent CNN wiring (conv-pool x3, dense, softmax): 32/32/64 filters,
// 128 dense units and 5x5 pooling reproduce the published architecture at
// input 1000; smaller runs scale the filters and pool window down.
nn::NetworkSpec make_parent_network(int input_size, int classes = 3, int base_filters = 32,
                                    int dense_units = 128, int pool_window = 5);

// Child = parent with doubled filter counts and a dropout-0.5 head on the
// fully connected layer.
nn::NetworkSpec make_child_network(int input_size, int classes = 4, int base_filters = 64,
                                   int dense_units = 128, int pool_window = 5,
                                   float dropout_rate = 0.5f);

// Label sets, routing, and the per-level preprocessing: color balancing at
// the parent level, stain normalization at the child level.
struct HierarchyConfig {
    std::vector<std::string> parent_labels{"Normal", "EE", "CD"};
    std::string routed_parent = "CD";
    std::vector<std::string> child_labels{"I", "IIIa", "IIIb", "IIIc"};

    img::ColorBalanceParams parent_balance = img::ColorBalanceParams::identity();
    img::StainNormParams child_stain{};
    int parent_input_size = 64;
    int child_input_size = 64;

    int routed_parent_index() const;
    void validate() const;
};

// Preprocessed image -> class probabilities. Trained networks plug in via
// make_network_classifier; tests may stub this directly.
using PatchClassifier = std::function<std::vector<float>(const img::RgbImage&)>;

struct TrainedModel {
    nn::NetworkSpec spec;
    nn::Parameters params;
};

PatchClassifier make_network_classifier(const TrainedModel& model);

struct HierarchyModels {
    PatchClassifier parent;
    PatchClassifier child;
};

struct HmicPrediction {
    int parent_label = 0;
    std::vector<float> parent_probs;
    std::optional<int> child_label;
    std::vector<float> child_probs;  // empty when not routed
};

// One patch prediction with provenance, over one level's label set.
struct PatchPrediction {
    std::string slide_id;
    int origin_x = 0;
    int origin_y = 0;
    std::vector<float> probs;
    int map_label = 0;
};

struct SlidePrediction {
    std::string slide_id;
    std::vector<double> sums;  // per-class probability sums
    int label = 0;
    int patch_count = 0;
};

// MAP label: argmax of the distribution, ties to the lowest index.
int patch_map_label(const std::vector<float>& probs);

// Parent classifies the color-balanced patch; the child runs on the
// stain-normalized patch iff the parent MAP equals the routed parent.
HmicPrediction hmic_predict_patch(const HierarchyConfig& config, const HierarchyModels& models,
                                  const img::RgbImage& patch);

// label = argmax_c sum_j p(y_j = c); sums retained for reporting.
SlidePrediction aggregate_slide(const std::vector<PatchPrediction>& patch_predictions);

struct LabeledImages {
    std::vector<img::RgbImage> images;
    std::vector<int> labels;
};

struct HmicTrainParams {
    // Parent defaults follow the published setup; child lr is a per-run
    // knob (the paper's 1e-5 assumes ~50k patches per class).
    optim::OptimizerConfig parent_optimizer = optim::OptimizerConfig::adam(0.001);
    optim::OptimizerConfig child_optimizer = optim::OptimizerConfig::rmsprop(1e-5);
    int parent_epochs = 10;
    int child_epochs = 10;
    int parent_filters = 8;
    int child_filters = 16;
    int dense_units = 32;
    int pool_window = 2;
    std::vector<double> parent_balance_levels{0.001, 0.01, 0.1, 1.0};
    std::uint64_t seed = 1;
};

struct TrainedHierarchy {
    HierarchyConfig config;
    TrainedModel parent;
    TrainedModel child;
    train::TrainResult parent_history;
    train::TrainResult child_history;

    HierarchyModels models() const;
};

// Trains both levels independently with their own preprocessing: the parent
// sees each patch at every configured balance level, the child sees
// stain-normalized routed-class patches only.
TrainedHierarchy hmic_train(const HierarchyConfig& config, const LabeledImages& parent_dataset,
                            const LabeledImages& child_dataset, const HmicTrainParams& params);

// "CD/IIIb" style joint key for end-to-end scoring.
std::string joint_label(const HierarchyConfig& config, int parent_label,
                        std::optional<int> child_label);

}  // namespace histokit::hmic
