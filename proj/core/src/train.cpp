#include "histokit/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace histokit::train {

void Dataset::validate(int classes) const {
    if (inputs.size() != labels.size()) throw DimensionError("dataset inputs/labels mismatch");
    if (inputs.empty()) throw ConfigError("dataset is empty");
    for (const int l : labels) {
        if (l < 0 || l >= classes) throw DomainError("dataset label out of range");
    }
}

int argmax_lowest(const std::vector<float>& values) {
    if (values.empty()) throw DomainError("argmax on empty vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

TrainResult train_classifier(const nn::NetworkSpec& spec, nn::Parameters& params,
                             const Dataset& dataset, const TrainOptions& options) {
    nn::validate_classifier(spec);
    const int classes = spec.layers.back().classes;
    dataset.validate(classes);

    TrainResult result;
    optim::OptimizerState opt = optim::make_optimizer_state(options.optimizer, params);
    Rng rng(stage_seed(options.seed, "train"));

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        long long correct = 0;
        for (const int idx : order) {
            const nn::Tensor& x = dataset.inputs[static_cast<std::size_t>(idx)];
            const int label = dataset.labels[static_cast<std::size_t>(idx)];
            auto fwd = nn::network_forward(spec, params, x, /*training=*/true, &rng);
            const double loss = nn::cross_entropy_loss(fwd.output, label);
            if (!std::isfinite(loss)) {
                if (options.reinit_on_nan && !result.reinitialized) {
                    params = nn::init_parameters(spec, stage_seed(options.seed, "train-reinit"));
                    opt = optim::make_optimizer_state(options.optimizer, params);
                    result.reinitialized = true;
                    continue;
                }
                continue;  // keep the diverged member as-is; votes absorb it
            }
            loss_sum += loss;
            if (argmax_lowest(fwd.output.data) == label) ++correct;
            nn::Gradients grads = nn::network_backward(spec, params, fwd.trace, label);
            optim::optimizer_step(params, grads, opt);
        }
        EpochStat stat;
        stat.epoch = epoch + 1;
        stat.loss = loss_sum / static_cast<double>(dataset.size());
        stat.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
        result.curve.push_back(stat);
    }
    return result;
}

std::pair<int, std::vector<float>> classify(const nn::NetworkSpec& spec,
                                            const nn::Parameters& params, const nn::Tensor& input) {
    auto fwd = nn::network_forward(spec, params, input);
    return {argmax_lowest(fwd.output.data), fwd.output.data};
}

double evaluate_accuracy(const nn::NetworkSpec& spec, const nn::Parameters& params,
                         const Dataset& dataset) {
    if (dataset.inputs.empty()) throw ConfigError("dataset is empty");
    long long correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (classify(spec, params, dataset.inputs[i]).first == dataset.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

void write_curve_csv(const std::vector<EpochStat>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "epoch,loss,accuracy\n";
    char buf[96];
    for (const auto& s : curve) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", s.epoch, s.loss, s.accuracy);
        out << buf;
    }
}

}  // namespace histokit::train
