#pragma once

#include <cstdint>
#include <vector>

#include "histokit/train.hpp"

namespace histokit::rmdl {

enum class ModelFamily { Mlp, Cnn, Rnn };

const char* family_name(ModelFamily f);

// One randomly sized ensemble member: its sampled network plus the
// optimizer assigned by the alternation rule.
struct RandomModelSpec {
    ModelFamily family = ModelFamily::Mlp;
    nn::NetworkSpec network;
    optim::OptimizerConfig optimizer;
    std::uint64_t init_seed = 0;
};

struct SamplingRanges {
    int mlp_layers_min = 1, mlp_layers_max = 4;
    int mlp_units_min = 32, mlp_units_max = 256;
    int cnn_blocks_min = 1, cnn_blocks_max = 3;
    int cnn_filters_min = 8, cnn_filters_max = 64;
    int rnn_layers_min = 1, rnn_layers_max = 2;
    int rnn_units_min = 16, rnn_units_max = 128;
    bool allow_lstm = true;
    bool allow_gru = true;

    void validate() const;
};

// Sampling plan: how many members per family, drawn from which ranges,
// classifying inputs of which (resized) shape.
struct EnsembleSpec {
    int n_members = 9;
    int mlp_count = 3;
    int cnn_count = 3;
    int rnn_count = 3;
    std::uint64_t seed = 1;
    SamplingRanges ranges;
    std::vector<int> input_shape{100, 100, 3};
    int classes = 3;

    void validate() const;
};

// Deterministic given seed: depth/width drawn uniformly from the ranges,
// optimizers alternating Adam/RMSProp by member index.
std::vector<RandomModelSpec> sample_ensemble(const EnsembleSpec& spec);

struct TrainedMember {
    RandomModelSpec spec;
    nn::Parameters params;
    train::TrainResult history;
};

struct TrainedEnsemble {
    std::vector<TrainedMember> members;
    int classes = 0;
};

// Trains every member independently on the same dataset (seeded per
// member, so the result is independent of scheduling/completion order).
TrainedEnsemble train_ensemble(const std::vector<RandomModelSpec>& members,
                               const train::Dataset& dataset, int epochs);

// Label = argmax of the softmax output; ties to the lowest class index.
std::pair<int, std::vector<float>> predict_member(const nn::NetworkSpec& network,
                                                  const nn::Parameters& params,
                                                  const nn::Tensor& input);

// Plurality winner; ties broken by the highest class-probability sum across
// members, then the lowest class index.
int majority_vote(const std::vector<int>& votes, const std::vector<std::vector<float>>& probs);

int ensemble_predict(const TrainedEnsemble& ensemble, const nn::Tensor& input);

// Per-sample, per-member votes plus each member's probability rows.
struct VoteMatrix {
    int n_members = 0;
    int classes = 0;
    std::vector<std::vector<int>> labels;                      // [sample][member]
    std::vector<std::vector<std::vector<float>>> probs;        // [sample][member][class]
};

VoteMatrix collect_votes(const TrainedEnsemble& ensemble, const std::vector<nn::Tensor>& inputs);

}  // namespace histokit::rmdl
