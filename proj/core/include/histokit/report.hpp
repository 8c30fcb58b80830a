#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histokit/hmic.hpp"
#include "histokit/manifest.hpp"

namespace histokit::io {

// One patch-level hierarchical prediction with ground truth, as persisted
// by the predict stage.
struct PredictionRecord {
    std::string slide_id;
    int origin_x = 0;
    int origin_y = 0;
    std::string true_parent;
    std::string true_child;  // empty when the parent is not the routed class
    std::string pred_parent;
    std::string pred_child;  // empty when not routed
    std::vector<float> parent_probs;
    std::vector<float> child_probs;
};

void save_predictions(const std::vector<PredictionRecord>& records, const std::string& path);
std::vector<PredictionRecord> load_predictions(const std::string& path);

// Deterministic stratified train/test slide split: per parent class, ids
// are sorted, shuffled by the seeded generator, and the tail becomes the
// test set. Any stage recomputes the identical split from (seed, manifest).
struct SlideSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;

    bool is_test(const std::string& slide_id) const;
};

SlideSplit split_slides(const std::vector<ManifestRecord>& records, std::uint64_t seed,
                        double test_fraction);

struct HierarchicalScores {
    double parent_accuracy = 0.0;
    double joint_accuracy = 0.0;  // parent and, where applicable, child both correct
};

HierarchicalScores hierarchical_scores(const std::vector<PredictionRecord>& records);

// Patch-level metrics at both levels plus whole-slide aggregation rows.
// Unrouted true-child patches count against child recall. Writes one
// one-vs-rest ROC CSV per class into roc_dir when non-empty. The returned
// JSON is byte-stable for identical inputs.
std::string build_report_json(const hmic::HierarchyConfig& config,
                              const std::vector<PredictionRecord>& records,
                              const std::string& roc_dir = "");

// Per-class macro F1 on the parent / child level, as used by the
// acceptance thresholds. Child F1 counts unrouted patches as errors.
double parent_macro_f1(const hmic::HierarchyConfig& config,
                       const std::vector<PredictionRecord>& records);
double child_macro_f1(const hmic::HierarchyConfig& config,
                      const std::vector<PredictionRecord>& records);

}  // namespace histokit::io
