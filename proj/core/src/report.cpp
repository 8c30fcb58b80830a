#include "histokit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "histokit/metrics.hpp"
#include "histokit/rng.hpp"

namespace histokit::io {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string join_probs(const std::vector<float>& probs) {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < probs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(probs[i]));
        if (i) out += ';';
        out += buf;
    }
    return out;
}

std::vector<float> parse_probs(const std::string& s) {
    std::vector<float> out;
    if (s.empty() || s == "-") return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) out.push_back(std::stof(item));
    return out;
}

}  // namespace

void save_predictions(const std::vector<PredictionRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "slide_id,origin_x,origin_y,true_parent,true_child,pred_parent,pred_child,"
           "parent_probs,child_probs\n";
    for (const PredictionRecord& r : records) {
        out << r.slide_id << ',' << r.origin_x << ',' << r.origin_y << ',' << r.true_parent << ','
            << (r.true_child.empty() ? "-" : r.true_child) << ',' << r.pred_parent << ','
            << (r.pred_child.empty() ? "-" : r.pred_child) << ',' << join_probs(r.parent_probs)
            << ',' << (r.child_probs.empty() ? "-" : join_probs(r.child_probs)) << '\n';
    }
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open predictions " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty predictions file");
    std::vector<PredictionRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 9) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": expected 9 fields");
        }
        PredictionRecord r;
        r.slide_id = fields[0];
        r.origin_x = std::stoi(fields[1]);
        r.origin_y = std::stoi(fields[2]);
        r.true_parent = fields[3];
        r.true_child = fields[4] == "-" ? "" : fields[4];
        r.pred_parent = fields[5];
        r.pred_child = fields[6] == "-" ? "" : fields[6];
        r.parent_probs = parse_probs(fields[7]);
        r.child_probs = parse_probs(fields[8]);
        records.push_back(std::move(r));
    }
    return records;
}

bool SlideSplit::is_test(const std::string& slide_id) const {
    return std::find(test.begin(), test.end(), slide_id) != test.end();
}

SlideSplit split_slides(const std::vector<ManifestRecord>& records, std::uint64_t seed,
                        double test_fraction) {
    if (test_fraction < 0.0 || test_fraction >= 1.0) {
        throw ConfigError("test_fraction must be in [0, 1)");
    }
    std::map<std::string, std::vector<std::string>> by_class;
    for (const ManifestRecord& r : records) by_class[r.parent_label].push_back(r.slide_id);

    SlideSplit split;
    for (auto& [label, ids] : by_class) {
        std::sort(ids.begin(), ids.end());
        Rng rng(stage_seed(seed, "split-" + label));
        rng.shuffle(ids);
        // At least one test slide per class whenever the fraction is nonzero.
        std::size_t n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(ids.size())));
        if (test_fraction > 0.0 && n_test == 0) n_test = 1;
        if (n_test >= ids.size() && ids.size() > 1) n_test = ids.size() - 1;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            (i < ids.size() - n_test ? split.train : split.test).push_back(ids[i]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

HierarchicalScores hierarchical_scores(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw DomainError("no prediction records");
    long long parent_ok = 0, joint_ok = 0;
    for (const PredictionRecord& r : records) {
        const bool p = r.pred_parent == r.true_parent;
        if (p) ++parent_ok;
        if (p && r.pred_child == r.true_child) ++joint_ok;
    }
    HierarchicalScores s;
    s.parent_accuracy = static_cast<double>(parent_ok) / static_cast<double>(records.size());
    s.joint_accuracy = static_cast<double>(joint_ok) / static_cast<double>(records.size());
    return s;
}

namespace {

int index_of(const std::vector<std::string>& labels, const std::string& label) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    throw DomainError("label '" + label + "' not in configured label set");
}

// Parent-level one-vs-rest counts.
std::vector<metrics::BinaryCounts> parent_counts(const hmic::HierarchyConfig& config,
                                                 const std::vector<PredictionRecord>& records) {
    std::vector<int> truths, preds;
    for (const PredictionRecord& r : records) {
        truths.push_back(index_of(config.parent_labels, r.true_parent));
        preds.push_back(index_of(config.parent_labels, r.pred_parent));
    }
    const auto cm = metrics::confusion(truths, preds, static_cast<int>(config.parent_labels.size()));
    std::vector<metrics::BinaryCounts> out;
    for (int c = 0; c < cm.classes; ++c) out.push_back(metrics::one_vs_rest(cm, c));
    return out;
}

// Child-level counts over true-child patches; a missing child prediction
// (parent routed elsewhere) counts as a miss for the true class.
std::vector<metrics::BinaryCounts> child_counts(const hmic::HierarchyConfig& config,
                                                const std::vector<PredictionRecord>& records) {
    const int c_classes = static_cast<int>(config.child_labels.size());
    std::vector<metrics::BinaryCounts> out(static_cast<std::size_t>(c_classes));
    long long scored = 0;
    std::vector<std::vector<long long>> m(static_cast<std::size_t>(c_classes),
                                          std::vector<long long>(static_cast<std::size_t>(c_classes) + 1, 0));
    for (const PredictionRecord& r : records) {
        if (r.true_child.empty()) continue;
        const int t = index_of(config.child_labels, r.true_child);
        const int p = r.pred_child.empty() ? c_classes : index_of(config.child_labels, r.pred_child);
        m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
        ++scored;
    }
    for (int c = 0; c < c_classes; ++c) {
        metrics::BinaryCounts& b = out[static_cast<std::size_t>(c)];
        for (int t = 0; t < c_classes; ++t) {
            for (int p = 0; p <= c_classes; ++p) {
                const long long v = m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
                if (t == c && p == c) b.tp += v;
                else if (t == c) b.fn += v;
                else if (p == c) b.fp += v;
                else b.tn += v;
            }
        }
    }
    (void)scored;
    return out;
}

ordered_json scores_json(const std::vector<metrics::BinaryCounts>& per_class,
                         const std::vector<std::string>& labels) {
    ordered_json out = ordered_json::object();
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto s = metrics::binary_scores(per_class[c]);
        const auto f1 = metrics::f_beta_from_counts(per_class[c], 1.0);
        ordered_json entry;
        entry["precision"] = s.precision ? ordered_json(*s.precision) : ordered_json(nullptr);
        entry["recall"] = s.sensitivity ? ordered_json(*s.sensitivity) : ordered_json(nullptr);
        entry["f1"] = f1 ? ordered_json(*f1) : ordered_json(nullptr);
        out[labels[c]] = std::move(entry);
    }
    return out;
}

ordered_json averages_json(const std::vector<metrics::BinaryCounts>& per_class, bool macro) {
    auto get = [&](metrics::MetricKind kind) -> ordered_json {
        if (macro) {
            const auto r = metrics::macro_average(per_class, kind);
            return r.value ? ordered_json(*r.value) : ordered_json(nullptr);
        }
        const auto r = metrics::micro_average(per_class, kind);
        return r ? ordered_json(*r) : ordered_json(nullptr);
    };
    ordered_json out;
    out["precision"] = get(metrics::MetricKind::Precision);
    out["recall"] = get(metrics::MetricKind::Recall);
    out["f1"] = get(metrics::MetricKind::FBeta);
    return out;
}

double macro_mcc(const std::vector<metrics::BinaryCounts>& per_class) {
    double sum = 0.0;
    for (const auto& c : per_class) sum += metrics::mcc(c);
    return sum / static_cast<double>(per_class.size());
}

// One-vs-rest ROC/AUC per class from probability scores. Classes whose
// score set is single-sided are reported as null.
ordered_json auc_json(const std::vector<std::string>& labels,
                      const std::vector<std::vector<double>>& scores,
                      const std::vector<std::vector<bool>>& is_positive, const std::string& roc_dir,
                      const std::string& level_tag) {
    ordered_json per_class = ordered_json::object();
    std::vector<double> defined;
    bool all_defined = true;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        bool has_pos = false, has_neg = false;
        for (const bool p : is_positive[c]) (p ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg || scores[c].empty()) {
            per_class[labels[c]] = nullptr;
            all_defined = false;
            continue;
        }
        const auto curve = metrics::roc_curve(scores[c], is_positive[c]);
        const double a = metrics::auc(curve);
        per_class[labels[c]] = a;
        defined.push_back(a);
        if (!roc_dir.empty()) {
            metrics::write_roc_csv(curve, (fs::path(roc_dir) / ("roc_" + labels[c] + ".csv")).string());
        }
    }
    ordered_json out;
    out["per_class"] = std::move(per_class);
    if (!defined.empty()) {
        // Mean over the defined classes; the literal formula needs all C.
        double sum = 0.0;
        for (const double a : defined) sum += a;
        out["mean"] = sum / static_cast<double>(defined.size());
        if (all_defined && labels.size() >= 2) {
            const auto mc = metrics::multiclass_auc(defined, static_cast<int>(labels.size()));
            out["paper_formula"] = mc.paper_formula;
        } else {
            out["paper_formula"] = nullptr;
        }
    } else {
        out["mean"] = nullptr;
        out["paper_formula"] = nullptr;
    }
    (void)level_tag;
    return out;
}

}  // namespace

double parent_macro_f1(const hmic::HierarchyConfig& config,
                       const std::vector<PredictionRecord>& records) {
    const auto counts = parent_counts(config, records);
    const auto r = metrics::macro_average(counts, metrics::MetricKind::FBeta);
    return r.value.value_or(0.0);
}

double child_macro_f1(const hmic::HierarchyConfig& config,
                      const std::vector<PredictionRecord>& records) {
    const auto counts = child_counts(config, records);
    const auto r = metrics::macro_average(counts, metrics::MetricKind::FBeta);
    return r.value.value_or(0.0);
}

std::string build_report_json(const hmic::HierarchyConfig& config,
                              const std::vector<PredictionRecord>& records,
                              const std::string& roc_dir) {
    if (records.empty()) throw DomainError("no prediction records to evaluate");
    if (!roc_dir.empty()) fs::create_directories(roc_dir);

    const auto p_counts = parent_counts(config, records);
    const auto c_counts = child_counts(config, records);

    ordered_json report;
    ordered_json per_class = scores_json(p_counts, config.parent_labels);
    const ordered_json child_scores = scores_json(c_counts, config.child_labels);
    for (auto it = child_scores.begin(); it != child_scores.end(); ++it) {
        per_class[it.key()] = it.value();
    }
    report["per_class"] = std::move(per_class);
    report["macro"] = averages_json(p_counts, true);
    report["micro"] = averages_json(p_counts, false);
    report["mcc"] = macro_mcc(p_counts);

    // Parent one-vs-rest ROC scores.
    {
        const std::size_t n_parent = config.parent_labels.size();
        std::vector<std::vector<double>> scores(n_parent);
        std::vector<std::vector<bool>> pos(n_parent);
        for (const PredictionRecord& r : records) {
            const int t = index_of(config.parent_labels, r.true_parent);
            for (std::size_t c = 0; c < n_parent; ++c) {
                if (c < r.parent_probs.size()) {
                    scores[c].push_back(static_cast<double>(r.parent_probs[c]));
                    pos[c].push_back(static_cast<int>(c) == t);
                }
            }
        }
        report["auc"] = auc_json(config.parent_labels, scores, pos, roc_dir, "parent");
    }

    // Child aggregates and ROC over routed patches with true child labels.
    {
        ordered_json child;
        child["macro"] = averages_json(c_counts, true);
        child["micro"] = averages_json(c_counts, false);
        child["mcc"] = macro_mcc(c_counts);
        const std::size_t n_child = config.child_labels.size();
        std::vector<std::vector<double>> scores(n_child);
        std::vector<std::vector<bool>> pos(n_child);
        for (const PredictionRecord& r : records) {
            if (r.true_child.empty() || r.child_probs.empty()) continue;
            const int t = index_of(config.child_labels, r.true_child);
            for (std::size_t c = 0; c < n_child; ++c) {
                scores[c].push_back(static_cast<double>(r.child_probs[c]));
                pos[c].push_back(static_cast<int>(c) == t);
            }
        }
        child["auc"] = auc_json(config.child_labels, scores, pos, roc_dir, "child");
        report["child"] = std::move(child);
    }

    const HierarchicalScores hs = hierarchical_scores(records);
    report["parent_accuracy"] = hs.parent_accuracy;
    report["joint_accuracy"] = hs.joint_accuracy;

    // Whole-slide aggregation: parent sums over all patches; child sums over
    // routed patches only.
    {
        std::map<std::string, std::vector<const PredictionRecord*>> by_slide;
        for (const PredictionRecord& r : records) by_slide[r.slide_id].push_back(&r);
        ordered_json rows = ordered_json::array();
        for (const auto& [slide_id, recs] : by_slide) {
            std::vector<hmic::PatchPrediction> parent_preds;
            std::vector<hmic::PatchPrediction> child_preds;
            for (const PredictionRecord* r : recs) {
                hmic::PatchPrediction p;
                p.slide_id = slide_id;
                p.probs = r->parent_probs;
                parent_preds.push_back(std::move(p));
                if (!r->child_probs.empty()) {
                    hmic::PatchPrediction cpred;
                    cpred.slide_id = slide_id;
                    cpred.probs = r->child_probs;
                    child_preds.push_back(std::move(cpred));
                }
            }
            const hmic::SlidePrediction parent_slide = hmic::aggregate_slide(parent_preds);
            ordered_json row;
            row["slide_id"] = slide_id;
            row["n_patches"] = static_cast<int>(recs.size());
            row["parent_label"] = config.parent_labels[static_cast<std::size_t>(parent_slide.label)];
            row["parent_sums"] = parent_slide.sums;
            if (!child_preds.empty()) {
                const hmic::SlidePrediction child_slide = hmic::aggregate_slide(child_preds);
                row["child_label"] = config.child_labels[static_cast<std::size_t>(child_slide.label)];
                row["child_sums"] = child_slide.sums;
            } else {
                row["child_label"] = "-";
                row["child_sums"] = ordered_json::array();
            }
            rows.push_back(std::move(row));
        }
        report["slide_level"] = std::move(rows);
    }

    return report.dump(2) + "\n";
}

}  // namespace histokit::io
