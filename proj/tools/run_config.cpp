#include "run_config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace histokit::cli {

using nlohmann::json;

hmic::HierarchyConfig RunConfig::hierarchy_config() const {
    hmic::HierarchyConfig h;
    h.parent_labels = parent_labels;
    h.routed_parent = routed_parent;
    h.child_labels = child_labels;
    h.parent_balance = img::balance_level_params(predict.balance_level);
    h.child_stain.target_mean = stain_target_mean;
    h.child_stain.target_std = stain_target_std;
    h.parent_input_size = model.input_size;
    h.child_input_size = model.input_size;
    h.validate();
    return h;
}

rmdl::EnsembleSpec RunConfig::ensemble_spec() const {
    rmdl::EnsembleSpec spec;
    spec.n_members = ensemble.members;
    spec.mlp_count = ensemble.mix[0];
    spec.cnn_count = ensemble.mix[1];
    spec.rnn_count = ensemble.mix[2];
    spec.seed = stage_seed(seed, "rmdl");
    spec.input_shape = {ensemble.input_size, ensemble.input_size, 3};
    spec.classes = static_cast<int>(parent_labels.size());
    spec.ranges.mlp_layers_min = ensemble.mlp_layers[0];
    spec.ranges.mlp_layers_max = ensemble.mlp_layers[1];
    spec.ranges.mlp_units_min = ensemble.mlp_units[0];
    spec.ranges.mlp_units_max = ensemble.mlp_units[1];
    spec.ranges.cnn_blocks_min = ensemble.cnn_blocks[0];
    spec.ranges.cnn_blocks_max = ensemble.cnn_blocks[1];
    spec.ranges.cnn_filters_min = ensemble.cnn_filters[0];
    spec.ranges.cnn_filters_max = ensemble.cnn_filters[1];
    spec.ranges.rnn_layers_min = ensemble.rnn_layers[0];
    spec.ranges.rnn_layers_max = ensemble.rnn_layers[1];
    spec.ranges.rnn_units_min = ensemble.rnn_units[0];
    spec.ranges.rnn_units_max = ensemble.rnn_units[1];
    spec.validate();
    return spec;
}

void RunConfig::validate() const {
    if (out.empty()) throw ConfigError("output directory must not be empty");
    if (patch_size < 8) throw ConfigError("patch_size must be >= 8");
    if (overlap < 0.0 || overlap >= 1.0) throw ConfigError("overlap must be in [0, 1)");
    if (balance_levels.empty()) throw ConfigError("need at least one balance level");
    for (const double l : balance_levels) {
        if (l < 0) throw ConfigError("balance levels must be >= 0");
    }
    if (test_fraction < 0.0 || test_fraction >= 1.0) {
        throw ConfigError("test_fraction must be in [0, 1)");
    }
    if (synth.slides_per_class < 1) throw ConfigError("synth.slides_per_class must be >= 1");
    if (synth.image_size < patch_size) {
        throw ConfigError("synth.image_size must be >= patch_size");
    }
    if (model.input_size < 8 || model.pool_window < 1) throw ConfigError("bad model geometry");
    if (model.parent_lr <= 0 || model.child_lr <= 0) throw ConfigError("learning rates must be > 0");
    if (model.dropout < 0.0f || model.dropout >= 1.0f) throw ConfigError("dropout must be in [0,1)");
    for (const double s : stain_target_std) {
        if (s <= 0) throw ConfigError("stain target std must be > 0");
    }
    hierarchy_config();
    ensemble_spec();
}

namespace {

void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown config key '" + where + it.key() + "'");
        }
    }
}

template <class T, std::size_t N>
void read_array(const json& j, const char* key, std::array<T, N>& out) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<T>>();
    if (v.size() != N) {
        throw ConfigError(std::string("config key '") + key + "' needs " + std::to_string(N) +
                          " values");
    }
    std::copy(v.begin(), v.end(), out.begin());
}

}  // namespace

void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }

    expect_keys(j, {"seed", "out", "patch_size", "overlap", "balance_levels", "test_fraction",
                    "synth", "filter", "model", "ensemble", "predict", "stain_target", "hierarchy"},
                "");

    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) config.out = j.at("out").get<std::string>();
    if (j.contains("patch_size")) config.patch_size = j.at("patch_size").get<int>();
    if (j.contains("overlap")) config.overlap = j.at("overlap").get<double>();
    if (j.contains("balance_levels")) {
        config.balance_levels = j.at("balance_levels").get<std::vector<double>>();
    }
    if (j.contains("test_fraction")) config.test_fraction = j.at("test_fraction").get<double>();

    if (j.contains("synth")) {
        const json& s = j.at("synth");
        expect_keys(s, {"slides_per_class", "image_size"}, "synth.");
        if (s.contains("slides_per_class")) config.synth.slides_per_class = s.at("slides_per_class").get<int>();
        if (s.contains("image_size")) config.synth.image_size = s.at("image_size").get<int>();
    }
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        expect_keys(f, {"latent_dim", "epochs", "input_size", "sample_limit", "restarts", "lr"},
                    "filter.");
        if (f.contains("latent_dim")) config.filter.latent_dim = f.at("latent_dim").get<int>();
        if (f.contains("epochs")) config.filter.epochs = f.at("epochs").get<int>();
        if (f.contains("input_size")) config.filter.input_size = f.at("input_size").get<int>();
        if (f.contains("sample_limit")) config.filter.sample_limit = f.at("sample_limit").get<int>();
        if (f.contains("restarts")) config.filter.restarts = f.at("restarts").get<int>();
        if (f.contains("lr")) config.filter.lr = f.at("lr").get<double>();
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        expect_keys(m,
                    {"input_size", "pool_window", "parent_filters", "child_filters", "dense_units",
                     "parent_lr", "child_lr", "dropout", "parent_epochs", "child_epochs"},
                    "model.");
        if (m.contains("input_size")) config.model.input_size = m.at("input_size").get<int>();
        if (m.contains("pool_window")) config.model.pool_window = m.at("pool_window").get<int>();
        if (m.contains("parent_filters")) config.model.parent_filters = m.at("parent_filters").get<int>();
        if (m.contains("child_filters")) config.model.child_filters = m.at("child_filters").get<int>();
        if (m.contains("dense_units")) config.model.dense_units = m.at("dense_units").get<int>();
        if (m.contains("parent_lr")) config.model.parent_lr = m.at("parent_lr").get<double>();
        if (m.contains("child_lr")) config.model.child_lr = m.at("child_lr").get<double>();
        if (m.contains("dropout")) config.model.dropout = m.at("dropout").get<float>();
        if (m.contains("parent_epochs")) config.model.parent_epochs = m.at("parent_epochs").get<int>();
        if (m.contains("child_epochs")) config.model.child_epochs = m.at("child_epochs").get<int>();
    }
    if (j.contains("ensemble")) {
        const json& e = j.at("ensemble");
        expect_keys(e,
                    {"members", "mix", "input_size", "epochs", "mlp_layers", "mlp_units",
                     "cnn_blocks", "cnn_filters", "rnn_layers", "rnn_units"},
                    "ensemble.");
        if (e.contains("members")) config.ensemble.members = e.at("members").get<int>();
        read_array(e, "mix", config.ensemble.mix);
        if (e.contains("input_size")) config.ensemble.input_size = e.at("input_size").get<int>();
        if (e.contains("epochs")) config.ensemble.epochs = e.at("epochs").get<int>();
        read_array(e, "mlp_layers", config.ensemble.mlp_layers);
        read_array(e, "mlp_units", config.ensemble.mlp_units);
        read_array(e, "cnn_blocks", config.ensemble.cnn_blocks);
        read_array(e, "cnn_filters", config.ensemble.cnn_filters);
        read_array(e, "rnn_layers", config.ensemble.rnn_layers);
        read_array(e, "rnn_units", config.ensemble.rnn_units);
    }
    if (j.contains("predict")) {
        const json& p = j.at("predict");
        expect_keys(p, {"balance_level"}, "predict.");
        if (p.contains("balance_level")) config.predict.balance_level = p.at("balance_level").get<double>();
    }
    if (j.contains("stain_target")) {
        const json& s = j.at("stain_target");
        expect_keys(s, {"mean", "std"}, "stain_target.");
        read_array(s, "mean", config.stain_target_mean);
        read_array(s, "std", config.stain_target_std);
    }
    if (j.contains("hierarchy")) {
        const json& h = j.at("hierarchy");
        expect_keys(h, {"parent_labels", "routed", "child_labels"}, "hierarchy.");
        if (h.contains("parent_labels")) {
            config.parent_labels = h.at("parent_labels").get<std::vector<std::string>>();
        }
        if (h.contains("routed")) config.routed_parent = h.at("routed").get<std::string>();
        if (h.contains("child_labels")) {
            config.child_labels = h.at("child_labels").get<std::vector<std::string>>();
        }
    }
}

void apply_hierarchy_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open hierarchy file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    expect_keys(j, {"parent_labels", "routed", "child_labels"}, "hierarchy.");
    if (j.contains("parent_labels")) {
        config.parent_labels = j.at("parent_labels").get<std::vector<std::string>>();
    }
    if (j.contains("routed")) config.routed_parent = j.at("routed").get<std::string>();
    if (j.contains("child_labels")) {
        config.child_labels = j.at("child_labels").get<std::vector<std::string>>();
    }
}

}  // namespace histokit::cli
