#pragma once

#include <optional>
#include <string>
#include <vector>

#include "histokit/error.hpp"

namespace histokit::metrics {

// C x C counts; rows are true classes, columns predicted.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<long long> counts;  // row-major

    long long& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
    long long at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
    long long total() const;
};

struct BinaryCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    long long total() const { return tp + fp + fn + tn; }
};

// Zero denominators surface as nullopt rather than 0.
struct BinaryScores {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;  // recall / TPR
    std::optional<double> specificity;
    std::optional<double> precision;
};

enum class MetricKind { Accuracy, Sensitivity, Specificity, Precision, Recall, FBeta };

struct AverageResult {
    std::optional<double> value;
    int undefined_classes = 0;  // per-class values excluded from a macro mean
};

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

// Threshold sweep over distinct scores, descending; tied scores collapse
// into one point; includes the (0,0) and (1,1) endpoints.
struct RocCurve {
    std::vector<RocPoint> points;
};

ConfusionMatrix confusion(const std::vector<int>& true_labels, const std::vector<int>& predicted_labels,
                          int classes);

// One-vs-rest collapse of class c.
BinaryCounts one_vs_rest(const ConfusionMatrix& m, int c);

BinaryScores binary_scores(const BinaryCounts& c);

// (1+b^2)PR / (b^2 P + R); 0 when both P and R are 0.
double f_beta(double precision, double recall, double beta);

std::optional<double> f_beta_from_counts(const BinaryCounts& c, double beta);

// (TP*TN - FP*FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN)); 0 when any factor
// is zero.
double mcc(const BinaryCounts& c);

// Macro: mean of per-class values (undefined classes excluded, counted).
// Micro: the metric on counts summed across classes.
AverageResult macro_average(const std::vector<BinaryCounts>& per_class, MetricKind kind,
                            double beta = 1.0);
std::optional<double> micro_average(const std::vector<BinaryCounts>& per_class, MetricKind kind,
                                    double beta = 1.0);

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positive);

// Trapezoidal area; equals the Mann-Whitney pair statistic with ties
// counted one half.
double auc(const RocCurve& curve);

struct MulticlassAuc {
    double paper_formula = 0.0;  // 2/(C(C-1)) * sum of per-class AUCs
    double mean = 0.0;           // plain average
};

// Both readings of the multi-class AUC average, labeled distinctly: the
// literal normalization exceeds 1 for C = 2 with perfect per-class AUCs.
MulticlassAuc multiclass_auc(const std::vector<double>& per_class_auc, int classes);

void write_roc_csv(const RocCurve& curve, const std::string& path);

}  // namespace histokit::metrics
