#include "histokit/rmdl.hpp"

#include <algorithm>

namespace histokit::rmdl {

using nn::Activation;
using nn::LayerSpec;

const char* family_name(ModelFamily f) {
    switch (f) {
        case ModelFamily::Mlp: return "mlp";
        case ModelFamily::Cnn: return "cnn";
        case ModelFamily::Rnn: return "rnn";
    }
    return "?";
}

void SamplingRanges::validate() const {
    auto check = [](int lo, int hi, const char* what) {
        if (lo < 1 || hi < lo) throw ConfigError(std::string("bad sampling range for ") + what);
    };
    check(mlp_layers_min, mlp_layers_max, "mlp layers");
    check(mlp_units_min, mlp_units_max, "mlp units");
    check(cnn_blocks_min, cnn_blocks_max, "cnn blocks");
    check(cnn_filters_min, cnn_filters_max, "cnn filters");
    check(rnn_layers_min, rnn_layers_max, "rnn layers");
    check(rnn_units_min, rnn_units_max, "rnn units");
    if (!allow_lstm && !allow_gru) throw ConfigError("rnn members need at least one cell kind");
}

void EnsembleSpec::validate() const {
    if (n_members < 1) throw ConfigError("ensemble needs at least one member");
    if (mlp_count < 0 || cnn_count < 0 || rnn_count < 0 ||
        mlp_count + cnn_count + rnn_count != n_members) {
        throw ConfigError("family mix must be non-negative and sum to n_members");
    }
    ranges.validate();
    if (input_shape.size() != 3) throw ConfigError("ensemble input shape must be [H,W,C]");
    if (classes < 2) throw ConfigError("ensemble needs at least two classes");
    if (cnn_count > 0 && (input_shape[0] < 2 || input_shape[1] < 2)) {
        throw ConfigError("cnn members need spatial input");
    }
}

namespace {

nn::NetworkSpec sample_mlp(const EnsembleSpec& spec, Rng& rng) {
    nn::NetworkSpec net;
    net.input_shape = spec.input_shape;
    net.layers.push_back(LayerSpec::flatten());
    const int depth = rng.uniform_int(spec.ranges.mlp_layers_min, spec.ranges.mlp_layers_max);
    for (int i = 0; i < depth; ++i) {
        const int units = rng.uniform_int(spec.ranges.mlp_units_min, spec.ranges.mlp_units_max);
        net.layers.push_back(LayerSpec::dense(units, Activation::Relu));
    }
    net.layers.push_back(LayerSpec::softmax_output(spec.classes));
    return net;
}

nn::NetworkSpec sample_cnn(const EnsembleSpec& spec, Rng& rng) {
    nn::NetworkSpec net;
    net.input_shape = spec.input_shape;
    int h = spec.input_shape[0], w = spec.input_shape[1];
    const int blocks = rng.uniform_int(spec.ranges.cnn_blocks_min, spec.ranges.cnn_blocks_max);
    for (int i = 0; i < blocks; ++i) {
        const int filters = rng.uniform_int(spec.ranges.cnn_filters_min, spec.ranges.cnn_filters_max);
        net.layers.push_back(LayerSpec::conv2d(filters, 3, Activation::Relu));
        if (h >= 4 && w >= 4) {  // stop pooling once the map is tiny
            net.layers.push_back(LayerSpec::maxpool2d(2));
            h /= 2;
            w /= 2;
        }
    }
    net.layers.push_back(LayerSpec::flatten());
    net.layers.push_back(LayerSpec::softmax_output(spec.classes));
    return net;
}

nn::NetworkSpec sample_rnn(const EnsembleSpec& spec, Rng& rng) {
    nn::NetworkSpec net;
    net.input_shape = spec.input_shape;
    const int depth = rng.uniform_int(spec.ranges.rnn_layers_min, spec.ranges.rnn_layers_max);
    for (int i = 0; i < depth; ++i) {
        const int units = rng.uniform_int(spec.ranges.rnn_units_min, spec.ranges.rnn_units_max);
        bool use_lstm = spec.ranges.allow_lstm;
        if (spec.ranges.allow_lstm && spec.ranges.allow_gru) use_lstm = rng.coin_flip();
        net.layers.push_back(use_lstm ? LayerSpec::lstm_cell(units) : LayerSpec::gru_cell(units));
    }
    net.layers.push_back(LayerSpec::flatten());
    net.layers.push_back(LayerSpec::softmax_output(spec.classes));
    return net;
}

}  // namespace

std::vector<RandomModelSpec> sample_ensemble(const EnsembleSpec& spec) {
    spec.validate();
    Rng rng(stage_seed(spec.seed, "rmdl-sample"));
    std::vector<RandomModelSpec> members;
    members.reserve(static_cast<std::size_t>(spec.n_members));
    for (int i = 0; i < spec.n_members; ++i) {
        RandomModelSpec m;
        if (i < spec.mlp_count) {
            m.family = ModelFamily::Mlp;
            m.network = sample_mlp(spec, rng);
        } else if (i < spec.mlp_count + spec.cnn_count) {
            m.family = ModelFamily::Cnn;
            m.network = sample_cnn(spec, rng);
        } else {
            m.family = ModelFamily::Rnn;
            m.network = sample_rnn(spec, rng);
        }
        // Two optimizers, alternating by member index.
        m.optimizer = (i % 2 == 0) ? optim::OptimizerConfig::adam(0.001)
                                   : optim::OptimizerConfig::rmsprop(0.001);
        m.init_seed = stage_seed(spec.seed, "rmdl-member", static_cast<std::uint64_t>(i));
        nn::validate_classifier(m.network);
        members.push_back(std::move(m));
    }
    return members;
}

TrainedEnsemble train_ensemble(const std::vector<RandomModelSpec>& members,
                               const train::Dataset& dataset, int epochs) {
    if (members.empty()) throw ConfigError("ensemble has no members");
    TrainedEnsemble ensemble;
    ensemble.classes = members[0].network.layers.back().classes;
    dataset.validate(ensemble.classes);
    for (const RandomModelSpec& spec : members) {
        if (spec.network.layers.back().classes != ensemble.classes) {
            throw ConfigError("members disagree on class count");
        }
        TrainedMember tm;
        tm.spec = spec;
        tm.params = nn::init_parameters(spec.network, spec.init_seed);
        train::TrainOptions opts;
        opts.optimizer = spec.optimizer;
        opts.epochs = epochs;
        opts.seed = spec.init_seed;
        tm.history = train::train_classifier(spec.network, tm.params, dataset, opts);
        ensemble.members.push_back(std::move(tm));
    }
    return ensemble;
}

std::pair<int, std::vector<float>> predict_member(const nn::NetworkSpec& network,
                                                  const nn::Parameters& params,
                                                  const nn::Tensor& input) {
    return train::classify(network, params, input);
}

int majority_vote(const std::vector<int>& votes, const std::vector<std::vector<float>>& probs) {
    if (votes.empty()) throw DomainError("majority_vote on empty vote vector");
    if (!probs.empty() && probs.size() != votes.size()) {
        throw DimensionError("votes/probs length mismatch");
    }
    const std::size_t classes = probs.empty() ? 0 : probs[0].size();
    int max_label = 0;
    for (const int v : votes) {
        if (v < 0) throw DomainError("negative vote label");
        max_label = std::max(max_label, v);
        if (classes > 0 && static_cast<std::size_t>(v) >= classes) {
            throw DomainError("vote label out of probability range");
        }
    }
    std::vector<int> tally(static_cast<std::size_t>(max_label) + 1, 0);
    for (const int v : votes) tally[static_cast<std::size_t>(v)]++;
    const int top = *std::max_element(tally.begin(), tally.end());

    std::vector<int> tied;
    for (int c = 0; c < static_cast<int>(tally.size()); ++c) {
        if (tally[static_cast<std::size_t>(c)] == top) tied.push_back(c);
    }
    if (tied.size() == 1 || probs.empty()) return tied[0];

    // Tie: highest summed probability across members, then lowest index.
    int best = tied[0];
    double best_sum = -1.0;
    for (const int c : tied) {
        double s = 0.0;
        for (const auto& row : probs) {
            if (static_cast<std::size_t>(c) < row.size()) s += row[static_cast<std::size_t>(c)];
        }
        if (s > best_sum) {
            best_sum = s;
            best = c;
        }
    }
    return best;
}

int ensemble_predict(const TrainedEnsemble& ensemble, const nn::Tensor& input) {
    if (ensemble.members.empty()) throw StateError("ensemble is not trained");
    std::vector<int> votes;
    std::vector<std::vector<float>> probs;
    votes.reserve(ensemble.members.size());
    probs.reserve(ensemble.members.size());
    for (const TrainedMember& m : ensemble.members) {
        auto [label, p] = predict_member(m.spec.network, m.params, input);
        votes.push_back(label);
        probs.push_back(std::move(p));
    }
    return majority_vote(votes, probs);
}

VoteMatrix collect_votes(const TrainedEnsemble& ensemble, const std::vector<nn::Tensor>& inputs) {
    VoteMatrix vm;
    vm.n_members = static_cast<int>(ensemble.members.size());
    vm.classes = ensemble.classes;
    vm.labels.reserve(inputs.size());
    vm.probs.reserve(inputs.size());
    for (const nn::Tensor& x : inputs) {
        std::vector<int> row_labels;
        std::vector<std::vector<float>> row_probs;
        for (const TrainedMember& m : ensemble.members) {
            auto [label, p] = predict_member(m.spec.network, m.params, x);
            row_labels.push_back(label);
            row_probs.push_back(std::move(p));
        }
        vm.labels.push_back(std::move(row_labels));
        vm.probs.push_back(std::move(row_probs));
    }
    return vm;
}

}  // namespace histokit::rmdl
