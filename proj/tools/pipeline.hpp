#pragma once

#include <string>
#include <vector>

#include "run_config.hpp"

namespace histokit::cli {

// One row of patch_index.csv. `useful` is -1 until the filter stage has
// appended its decision.
struct PatchIndexRow {
    std::string slide_id;
    std::string path;  // relative to the working directory
    int origin_x = 0;
    int origin_y = 0;
    std::string parent_label;
    std::string child_label;
    int useful = -1;
};

std::vector<PatchIndexRow> load_patch_index(const std::string& path);
void save_patch_index(const std::vector<PatchIndexRow>& rows, const std::string& path);

void run_synth(const RunConfig& config);
void run_patch(const RunConfig& config);
void run_filter(const RunConfig& config);
void run_balance(const RunConfig& config);
void run_train_parent(const RunConfig& config);
void run_train_child(const RunConfig& config);
void run_train_rmdl(const RunConfig& config);
void run_predict(const RunConfig& config);
void run_evaluate(const RunConfig& config);

}  // namespace histokit::cli
