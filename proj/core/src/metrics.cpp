#include "histokit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace histokit::metrics {

long long ConfusionMatrix::total() const {
    long long t = 0;
    for (const long long v : counts) t += v;
    return t;
}

ConfusionMatrix confusion(const std::vector<int>& true_labels,
                          const std::vector<int>& predicted_labels, int classes) {
    if (true_labels.size() != predicted_labels.size()) {
        throw DimensionError("label vectors have different lengths");
    }
    if (classes < 1) throw DomainError("classes must be >= 1");
    ConfusionMatrix m;
    m.classes = classes;
    m.counts.assign(static_cast<std::size_t>(classes) * classes, 0);
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i], p = predicted_labels[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes) {
            throw DomainError("label out of range at index " + std::to_string(i));
        }
        m.at(t, p) += 1;
    }
    return m;
}

BinaryCounts one_vs_rest(const ConfusionMatrix& m, int c) {
    if (c < 0 || c >= m.classes) throw DomainError("class index out of range");
    BinaryCounts b;
    for (int t = 0; t < m.classes; ++t) {
        for (int p = 0; p < m.classes; ++p) {
            const long long v = m.at(t, p);
            if (t == c && p == c) b.tp += v;
            else if (t == c) b.fn += v;
            else if (p == c) b.fp += v;
            else b.tn += v;
        }
    }
    return b;
}

namespace {

std::optional<double> ratio(long long num, long long den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

BinaryScores binary_scores(const BinaryCounts& c) {
    BinaryScores s;
    s.accuracy = ratio(c.tp + c.tn, c.total());
    s.sensitivity = ratio(c.tp, c.tp + c.fn);
    s.specificity = ratio(c.tn, c.tn + c.fp);
    s.precision = ratio(c.tp, c.tp + c.fp);
    return s;
}

double f_beta(double precision, double recall, double beta) {
    if (precision < 0 || precision > 1 || recall < 0 || recall > 1) {
        throw DomainError("precision/recall must be in [0,1]");
    }
    if (!(beta > 0)) throw DomainError("beta must be > 0");
    if (precision == 0.0 && recall == 0.0) return 0.0;
    const double b2 = beta * beta;
    return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

std::optional<double> f_beta_from_counts(const BinaryCounts& c, double beta) {
    const auto s = binary_scores(c);
    if (!s.precision || !s.sensitivity) return std::nullopt;
    return f_beta(*s.precision, *s.sensitivity, beta);
}

double mcc(const BinaryCounts& c) {
    const double num = static_cast<double>(c.tp) * static_cast<double>(c.tn) -
                       static_cast<double>(c.fp) * static_cast<double>(c.fn);
    const double f1 = static_cast<double>(c.tp + c.fp);
    const double f2 = static_cast<double>(c.tp + c.fn);
    const double f3 = static_cast<double>(c.tn + c.fp);
    const double f4 = static_cast<double>(c.tn + c.fn);
    if (f1 == 0 || f2 == 0 || f3 == 0 || f4 == 0) return 0.0;
    return num / std::sqrt(f1 * f2 * f3 * f4);
}

namespace {

std::optional<double> metric_value(const BinaryCounts& c, MetricKind kind, double beta) {
    const BinaryScores s = binary_scores(c);
    switch (kind) {
        case MetricKind::Accuracy: return s.accuracy;
        case MetricKind::Sensitivity:
        case MetricKind::Recall: return s.sensitivity;
        case MetricKind::Specificity: return s.specificity;
        case MetricKind::Precision: return s.precision;
        case MetricKind::FBeta: return f_beta_from_counts(c, beta);
    }
    return std::nullopt;
}

}  // namespace

AverageResult macro_average(const std::vector<BinaryCounts>& per_class, MetricKind kind,
                            double beta) {
    if (per_class.empty()) throw DomainError("macro_average needs at least one class");
    AverageResult r;
    double sum = 0.0;
    int defined = 0;
    for (const auto& c : per_class) {
        const auto v = metric_value(c, kind, beta);
        if (v) {
            sum += *v;
            ++defined;
        } else {
            ++r.undefined_classes;
        }
    }
    if (defined > 0) r.value = sum / defined;
    return r;
}

std::optional<double> micro_average(const std::vector<BinaryCounts>& per_class, MetricKind kind,
                                    double beta) {
    if (per_class.empty()) throw DomainError("micro_average needs at least one class");
    BinaryCounts pooled;
    for (const auto& c : per_class) {
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn += c.fn;
        pooled.tn += c.tn;
    }
    return metric_value(pooled, kind, beta);
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw DimensionError("scores/labels length mismatch");
    long long pos = 0, neg = 0;
    for (const bool p : positive) (p ? pos : neg)++;
    if (pos == 0 || neg == 0) {
        throw DomainError("roc_curve needs at least one positive and one negative");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // Group tied scores into a single threshold point.
        while (i < order.size() && scores[order[i]] == s) {
            if (positive[order[i]]) ++tp;
            else ++fp;
            ++i;
        }
        curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos)});
    }
    return curve;  // last point is (1,1) by construction
}

double auc(const RocCurve& curve) {
    if (curve.points.size() < 2) throw DomainError("roc curve has too few points");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

MulticlassAuc multiclass_auc(const std::vector<double>& per_class_auc, int classes) {
    if (classes < 2) throw DomainError("multiclass_auc needs C >= 2");
    if (static_cast<int>(per_class_auc.size()) != classes) {
        throw DimensionError("need one AUC per class");
    }
    const double sum = std::accumulate(per_class_auc.begin(), per_class_auc.end(), 0.0);
    MulticlassAuc r;
    r.paper_formula = 2.0 / (static_cast<double>(classes) * (classes - 1)) * sum;
    r.mean = sum / classes;
    return r;
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "threshold,fpr,tpr\n";
    char buf[128];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.threshold, p.fpr, p.tpr);
        out << buf;
    }
}

}  // namespace histokit::metrics
