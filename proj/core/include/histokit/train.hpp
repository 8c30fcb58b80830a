#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histokit/network.hpp"
#include "histokit/optim.hpp"

namespace histokit::train {

struct Dataset {
    std::vector<nn::Tensor> inputs;
    std::vector<int> labels;

    std::size_t size() const { return inputs.size(); }
    void validate(int classes) const;
};

struct EpochStat {
    int epoch = 0;
    double loss = 0.0;      // mean per-example cross entropy over the epoch
    double accuracy = 0.0;  // running accuracy of the pre-step predictions
};

struct TrainOptions {
    optim::OptimizerConfig optimizer;
    int epochs = 10;
    std::uint64_t seed = 1;
    bool reinit_on_nan = true;  // one re-initialization, then keep whatever results
};

struct TrainResult {
    std::vector<EpochStat> curve;
    bool reinitialized = false;
};

// Per-example SGD with a seeded shuffle each epoch. Divergence (non-finite
// loss) triggers at most one re-initialization; the member is then retained
// as-is.
TrainResult train_classifier(const nn::NetworkSpec& spec, nn::Parameters& params,
                             const Dataset& dataset, const TrainOptions& options);

// Argmax label and probabilities for one input; ties to the lowest index.
std::pair<int, std::vector<float>> classify(const nn::NetworkSpec& spec,
                                            const nn::Parameters& params, const nn::Tensor& input);

double evaluate_accuracy(const nn::NetworkSpec& spec, const nn::Parameters& params,
                         const Dataset& dataset);

int argmax_lowest(const std::vector<float>& values);

// "epoch,loss,accuracy" per row.
void write_curve_csv(const std::vector<EpochStat>& curve, const std::string& path);

}  // namespace histokit::train
