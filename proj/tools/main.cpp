#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pipeline.hpp"

namespace {

using histokit::cli::RunConfig;

struct FlagOverrides {
    std::string config_path;
    std::string hierarchy_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    int patch_size = 0;
    double overlap = -1.0;
    std::vector<double> balance_levels;
    int members = 0;
    int epochs = 0;
};

// Flags override the config file; the file overrides built-in defaults.
RunConfig resolve_config(const FlagOverrides& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) histokit::cli::apply_config_file(config, flags.config_path);
    if (!flags.hierarchy_path.empty()) {
        histokit::cli::apply_hierarchy_file(config, flags.hierarchy_path);
    }
    if (flags.seed_set) config.seed = flags.seed;
    if (!flags.out.empty()) config.out = flags.out;
    if (flags.patch_size > 0) config.patch_size = flags.patch_size;
    if (flags.overlap >= 0.0) config.overlap = flags.overlap;
    if (!flags.balance_levels.empty()) config.balance_levels = flags.balance_levels;
    if (flags.members > 0) config.ensemble.members = flags.members;
    if (flags.epochs > 0) {
        config.model.parent_epochs = flags.epochs;
        config.model.child_epochs = flags.epochs;
        config.ensemble.epochs = flags.epochs;
    }
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"histokit - hierarchical histopathology classification pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    FlagOverrides flags;
    app.add_option("--config", flags.config_path, "JSON run configuration file");
    app.add_option("--hierarchy", flags.hierarchy_path, "JSON hierarchy (labels/routing) override");
    app.add_option("--seed", flags.seed, "root seed for all stages")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    app.add_option("--out", flags.out, "working directory for all stages");
    app.add_option("--patch-size", flags.patch_size, "square patch size in pixels");
    app.add_option("--overlap", flags.overlap, "patch overlap fraction in [0,1)");
    app.add_option("--balance-levels", flags.balance_levels,
                   "color balancing percentages for parent training")
        ->delimiter(',');
    app.add_option("--members", flags.members, "ensemble member count");
    app.add_option("--epochs", flags.epochs, "epoch override for all trainers");

    void (*stages[])(const RunConfig&) = {
        histokit::cli::run_synth,       histokit::cli::run_patch,      histokit::cli::run_filter,
        histokit::cli::run_balance,     histokit::cli::run_train_parent,
        histokit::cli::run_train_child, histokit::cli::run_train_rmdl, histokit::cli::run_predict,
        histokit::cli::run_evaluate,
    };
    const char* names[] = {"synth",       "patch",       "filter",     "balance", "train-parent",
                           "train-child", "train-rmdl",  "predict",    "evaluate"};
    const char* descriptions[] = {
        "generate the seeded synthetic slide dataset",
        "tile slides into overlapping patches",
        "autoencoder + k-means informative-patch selection",
        "write color-balanced patch copies for parent training",
        "train the parent-level classifier",
        "train the routed child-level classifier",
        "train the random multimodel ensemble on the parent task",
        "hierarchical inference over held-out patches",
        "metrics report, ROC CSVs, and per-slide aggregation",
    };

    int selected = -1;
    for (int i = 0; i < 9; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descriptions[i]);
        sub->callback([&selected, i]() { selected = i; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig config = resolve_config(flags);
        stages[selected](config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
