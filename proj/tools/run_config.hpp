#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "histokit/hmic.hpp"
#include "histokit/rmdl.hpp"

namespace histokit::cli {

// Desk-scale defaults; every field can come from --config JSON and the
// documented flags override the file.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out = "run";
    int patch_size = 64;
    double overlap = 0.5;
    std::vector<double> balance_levels{0.001, 0.01, 0.1, 1.0};
    double test_fraction = 0.25;

    struct {
        int slides_per_class = 6;
        int image_size = 192;
    } synth;

    struct {
        int latent_dim = 32;
        int epochs = 6;
        int input_size = 32;
        int sample_limit = 256;
        int restarts = 5;
        double lr = 0.005;
    } filter;

    struct {
        int input_size = 64;
        int pool_window = 2;
        int parent_filters = 8;
        int child_filters = 16;
        int dense_units = 32;
        double parent_lr = 0.001;
        double child_lr = 3e-4;  // paper-scale default is RMSProp 1e-5
        float dropout = 0.5f;
        int parent_epochs = 6;
        int child_epochs = 8;
    } model;

    struct {
        int members = 9;
        std::array<int, 3> mix{3, 3, 3};  // mlp, cnn, rnn
        int input_size = 32;
        int epochs = 4;
        std::array<int, 2> mlp_layers{1, 2};
        std::array<int, 2> mlp_units{8, 32};
        std::array<int, 2> cnn_blocks{1, 2};
        std::array<int, 2> cnn_filters{4, 8};
        std::array<int, 2> rnn_layers{1, 1};
        std::array<int, 2> rnn_units{8, 16};
    } ensemble;

    struct {
        double balance_level = 0.0;  // parent-level preprocessing at predict time
    } predict;

    std::array<double, 3> stain_target_mean{0.8, 0.8, 0.8};
    std::array<double, 3> stain_target_std{0.3, 0.3, 0.3};

    // Label sets / routing; overridable via --hierarchy.
    std::vector<std::string> parent_labels{"Normal", "EE", "CD"};
    std::string routed_parent = "CD";
    std::vector<std::string> child_labels{"I", "IIIa", "IIIb", "IIIc"};

    hmic::HierarchyConfig hierarchy_config() const;
    rmdl::EnsembleSpec ensemble_spec() const;
    void validate() const;
};

// Parses the JSON config file; unknown keys are rejected so typos fail
// before any work starts.
void apply_config_file(RunConfig& config, const std::string& path);

// Hierarchy override file: {"parent_labels": [...], "routed": "...",
// "child_labels": [...]}.
void apply_hierarchy_file(RunConfig& config, const std::string& path);

}  // namespace histokit::cli
