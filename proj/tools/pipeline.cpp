#include "pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "histokit/autoencoder.hpp"
#include "histokit/checkpoint.hpp"
#include "histokit/kmeans.hpp"
#include "histokit/manifest.hpp"
#include "histokit/report.hpp"
#include "histokit/synth.hpp"

namespace histokit::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void require_artifact(const fs::path& path, const std::string& producing_stage) {
    if (!fs::exists(path)) {
        throw StateError("missing " + path.string() + "; run 'histokit " + producing_stage +
                         "' first");
    }
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

int label_index(const std::vector<std::string>& labels, const std::string& label,
                const std::string& what) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    throw ConfigError(what + " label '" + label + "' is not in the configured label set");
}

int count_useful(const std::vector<PatchIndexRow>& rows) {
    int n = 0;
    for (const auto& r : rows) n += r.useful == 1;
    return n;
}

}  // namespace

std::vector<PatchIndexRow> load_patch_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open patch index " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty patch index");
    const bool has_useful = line.find(",useful") != std::string::npos;
    std::vector<PatchIndexRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_fields(line);
        const std::size_t want = has_useful ? 7 : 6;
        if (f.size() != want) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": expected " +
                              std::to_string(want) + " fields");
        }
        PatchIndexRow r;
        r.slide_id = f[0];
        r.path = f[1];
        r.origin_x = std::stoi(f[2]);
        r.origin_y = std::stoi(f[3]);
        r.parent_label = f[4];
        r.child_label = f[5] == "-" ? "" : f[5];
        if (has_useful) r.useful = std::stoi(f[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void save_patch_index(const std::vector<PatchIndexRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write patch index " + path);
    const bool has_useful = !rows.empty() && rows.front().useful >= 0;
    out << "slide_id,path,origin_x,origin_y,parent_label,child_label" << (has_useful ? ",useful" : "")
        << "\n";
    for (const auto& r : rows) {
        out << r.slide_id << ',' << r.path << ',' << r.origin_x << ',' << r.origin_y << ','
            << r.parent_label << ',' << (r.child_label.empty() ? "-" : r.child_label);
        if (has_useful) out << ',' << r.useful;
        out << '\n';
    }
}

void run_synth(const RunConfig& config) {
    synth::SynthConfig sc;
    sc.seed = stage_seed(config.seed, "synth-stage");
    sc.slides_per_class = config.synth.slides_per_class;
    sc.image_size = config.synth.image_size;
    sc.out_dir = config.out;
    const auto result = synth::generate_synthetic_dataset(sc);
    std::cout << "synth: wrote " << result.records.size() << " slides to " << config.out
              << " (manifest.csv)\n";
}

void run_patch(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "manifest.csv", "synth");
    const auto manifest = io::load_manifest((out / "manifest.csv").string(), config.routed_parent);

    const img::PatchSpec spec{config.patch_size, config.overlap};
    std::vector<PatchIndexRow> rows;
    for (const auto& rec : manifest) {
        const img::RgbImage image = img::load_image((out / rec.image_path).string());
        fs::create_directories(out / "patches" / rec.slide_id);
        for (const auto& patch : img::extract_patches(image, spec, rec.slide_id)) {
            char name[64];
            std::snprintf(name, sizeof(name), "%d_%d.ppm", patch.origin_x, patch.origin_y);
            const std::string rel = "patches/" + rec.slide_id + "/" + name;
            img::write_ppm(patch.image, (out / rel).string());
            PatchIndexRow row;
            row.slide_id = rec.slide_id;
            row.path = rel;
            row.origin_x = patch.origin_x;
            row.origin_y = patch.origin_y;
            row.parent_label = rec.parent_label;
            row.child_label = rec.child_label;
            rows.push_back(std::move(row));
        }
    }
    save_patch_index(rows, (out / "patch_index.csv").string());
    std::cout << "patch: " << rows.size() << " patches from " << manifest.size() << " slides\n";
}

void run_filter(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "patch_index.csv", "patch");
    auto rows = load_patch_index((out / "patch_index.csv").string());
    if (rows.empty()) throw StateError("patch index is empty; run 'histokit patch' first");

    // Deterministic subsample for autoencoder training.
    const int side = config.filter.input_size;
    std::vector<img::RgbImage> patches;
    patches.reserve(rows.size());
    for (const auto& r : rows) {
        patches.push_back(img::load_image((out / r.path).string()));
    }
    std::vector<int> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng sample_rng(stage_seed(config.seed, "filter-sample"));
    sample_rng.shuffle(order);
    std::vector<nn::Tensor> train_set;
    const int limit = std::min<int>(config.filter.sample_limit, static_cast<int>(rows.size()));
    for (int i = 0; i < limit; ++i) {
        const auto& patch = patches[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        train_set.push_back(img::image_to_tensor(img::resize_bilinear(patch, side, side)));
    }

    const auto spec = filter::default_autoencoder({side, side, 3}, config.filter.latent_dim);
    const auto ae = filter::autoencoder_train(train_set, spec,
                                              optim::OptimizerConfig::adam(config.filter.lr),
                                              config.filter.epochs,
                                              stage_seed(config.seed, "filter-ae"));

    std::vector<std::vector<double>> latents;
    latents.reserve(rows.size());
    for (const auto& patch : patches) {
        const auto z = filter::encode(ae, img::image_to_tensor(img::resize_bilinear(patch, side, side)));
        latents.emplace_back(z.begin(), z.end());
    }

    filter::ClusterModel best;
    double best_inertia = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < std::max(1, config.filter.restarts); ++restart) {
        const auto model = filter::kmeans_fit(latents, 2,
                                              stage_seed(config.seed, "filter-kmeans",
                                                         static_cast<std::uint64_t>(restart)));
        if (model.inertia < best_inertia) {
            best_inertia = model.inertia;
            best = model;
        }
    }

    std::vector<int> assignments;
    assignments.reserve(latents.size());
    for (const auto& z : latents) assignments.push_back(filter::kmeans_assign(best, z));
    const int useful_cluster = filter::select_useful_cluster(best, patches, assignments);

    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].useful = assignments[i] == useful_cluster ? 1 : 0;
    }
    save_patch_index(rows, (out / "patch_index.csv").string());

    // Per-class summary in the published count (pct) style.
    std::map<std::string, std::pair<long long, long long>> by_class;  // useful, total
    for (const auto& r : rows) {
        auto& [u, t] = by_class[r.parent_label];
        u += r.useful == 1;
        t += 1;
    }
    std::cout << "filter: kmeans inertia " << best.inertia << ", useful cluster " << useful_cluster
              << "\n";
    long long all_u = 0, all_t = 0;
    for (const auto& [label, ut] : by_class) {
        std::cout << "  " << label << ": useful " << filter::format_count_pct(ut.first, ut.second)
                  << " of " << ut.second << "\n";
        all_u += ut.first;
        all_t += ut.second;
    }
    std::cout << "  total: useful " << filter::format_count_pct(all_u, all_t) << " of " << all_t
              << "\n";
}

namespace {

std::vector<PatchIndexRow> useful_rows(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "patch_index.csv", "patch");
    auto rows = load_patch_index((out / "patch_index.csv").string());
    if (rows.empty()) throw StateError("patch index is empty; run 'histokit patch' first");
    if (rows.front().useful < 0) {
        throw StateError("patch index has no filter decisions; run 'histokit filter' first");
    }
    std::vector<PatchIndexRow> kept;
    for (auto& r : rows) {
        if (r.useful == 1) kept.push_back(std::move(r));
    }
    if (kept.empty()) throw StateError("filter kept no patches; inspect the filter stage output");
    return kept;
}

}  // namespace

void run_balance(const RunConfig& config) {
    const fs::path out(config.out);
    const auto rows = useful_rows(config);

    std::ofstream index((out / "balanced_index.csv").string());
    if (!index) throw FormatError("cannot write balanced_index.csv");
    index << "level_index,percentage,slide_id,path,origin_x,origin_y,parent_label,child_label\n";
    char buf[64];
    for (std::size_t li = 0; li < config.balance_levels.size(); ++li) {
        const double pct = config.balance_levels[li];
        const auto params = img::balance_level_params(pct);
        for (const auto& r : rows) {
            const img::RgbImage patch = img::load_image((out / r.path).string());
            const img::RgbImage balanced = img::color_balance(patch, params);
            fs::create_directories(out / "balanced" / std::to_string(li) / r.slide_id);
            std::snprintf(buf, sizeof(buf), "%d_%d.ppm", r.origin_x, r.origin_y);
            const std::string rel =
                "balanced/" + std::to_string(li) + "/" + r.slide_id + "/" + buf;
            img::write_ppm(balanced, (out / rel).string());
            index << li << ',' << pct << ',' << r.slide_id << ',' << rel << ',' << r.origin_x << ','
                  << r.origin_y << ',' << r.parent_label << ','
                  << (r.child_label.empty() ? "-" : r.child_label) << '\n';
        }
    }
    std::cout << "balance: " << rows.size() << " patches x " << config.balance_levels.size()
              << " levels\n";
}

namespace {

struct BalancedRow {
    int level_index = 0;
    std::string slide_id;
    std::string path;
    std::string parent_label;
};

std::vector<BalancedRow> load_balanced_index(const fs::path& out) {
    require_artifact(out / "balanced_index.csv", "balance");
    std::ifstream in((out / "balanced_index.csv").string());
    std::string line;
    std::getline(in, line);
    std::vector<BalancedRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 8) throw FormatError("balanced_index.csv: malformed row");
        rows.push_back({std::stoi(f[0]), f[2], f[3], f[6]});
    }
    return rows;
}

void write_model_checkpoint(const nn::NetworkSpec& spec, const nn::Parameters& params,
                            const optim::OptimizerState& opt, const fs::path& path) {
    io::Checkpoint ck;
    ck.spec = spec;
    ck.params = params;
    ck.optimizer = opt;
    fs::create_directories(path.parent_path());
    io::save_checkpoint(ck, path.string());
}

}  // namespace

void run_train_parent(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "manifest.csv", "synth");
    const auto manifest = io::load_manifest((out / "manifest.csv").string(), config.routed_parent);
    const auto split = io::split_slides(manifest, config.seed, config.test_fraction);
    const auto balanced = load_balanced_index(out);

    train::Dataset ds;
    for (const auto& row : balanced) {
        if (split.is_test(row.slide_id)) continue;
        const img::RgbImage patch = img::load_image((out / row.path).string());
        ds.inputs.push_back(img::image_to_tensor(
            img::resize_bilinear(patch, config.model.input_size, config.model.input_size)));
        ds.labels.push_back(label_index(config.parent_labels, row.parent_label, "parent"));
    }
    if (ds.inputs.empty()) throw StateError("no training patches after the slide split");

    const auto spec = hmic::make_parent_network(config.model.input_size,
                                                static_cast<int>(config.parent_labels.size()),
                                                config.model.parent_filters, config.model.dense_units,
                                                config.model.pool_window);
    nn::Parameters params = nn::init_parameters(spec, stage_seed(config.seed, "parent-init"));
    train::TrainOptions opts;
    opts.optimizer = optim::OptimizerConfig::adam(config.model.parent_lr);
    opts.epochs = config.model.parent_epochs;
    opts.seed = stage_seed(config.seed, "parent-train");
    const auto history = train::train_classifier(spec, params, ds, opts);

    const auto opt_state = optim::make_optimizer_state(opts.optimizer, params);
    write_model_checkpoint(spec, params, opt_state, out / "models" / "parent.ckpt");
    fs::create_directories(out / "curves");
    train::write_curve_csv(history.curve, (out / "curves" / "parent.csv").string());
    std::cout << "train-parent: " << ds.inputs.size() << " samples, " << history.curve.size()
              << " epochs, final accuracy " << history.curve.back().accuracy << "\n";
}

void run_train_child(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "manifest.csv", "synth");
    const auto manifest = io::load_manifest((out / "manifest.csv").string(), config.routed_parent);
    const auto split = io::split_slides(manifest, config.seed, config.test_fraction);
    const auto rows = useful_rows(config);
    const auto hierarchy = config.hierarchy_config();

    train::Dataset ds;
    for (const auto& row : rows) {
        if (row.parent_label != config.routed_parent || split.is_test(row.slide_id)) continue;
        const img::RgbImage patch = img::load_image((out / row.path).string());
        const img::RgbImage normalized = img::stain_normalize(patch, hierarchy.child_stain);
        ds.inputs.push_back(img::image_to_tensor(
            img::resize_bilinear(normalized, config.model.input_size, config.model.input_size)));
        ds.labels.push_back(label_index(config.child_labels, row.child_label, "child"));
    }
    if (ds.inputs.empty()) {
        throw StateError("no routed-class training patches; the child level is untrainable");
    }

    const auto spec = hmic::make_child_network(config.model.input_size,
                                               static_cast<int>(config.child_labels.size()),
                                               config.model.child_filters, config.model.dense_units,
                                               config.model.pool_window, config.model.dropout);
    nn::Parameters params = nn::init_parameters(spec, stage_seed(config.seed, "child-init"));
    train::TrainOptions opts;
    opts.optimizer = optim::OptimizerConfig::rmsprop(config.model.child_lr);
    opts.epochs = config.model.child_epochs;
    opts.seed = stage_seed(config.seed, "child-train");
    const auto history = train::train_classifier(spec, params, ds, opts);

    const auto opt_state = optim::make_optimizer_state(opts.optimizer, params);
    write_model_checkpoint(spec, params, opt_state, out / "models" / "child.ckpt");
    fs::create_directories(out / "curves");
    train::write_curve_csv(history.curve, (out / "curves" / "child.csv").string());
    std::cout << "train-child: " << ds.inputs.size() << " samples, final accuracy "
              << history.curve.back().accuracy << "\n";
}

void run_train_rmdl(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "manifest.csv", "synth");
    const auto manifest = io::load_manifest((out / "manifest.csv").string(), config.routed_parent);
    const auto split = io::split_slides(manifest, config.seed, config.test_fraction);
    const auto rows = useful_rows(config);

    const int side = config.ensemble.input_size;
    train::Dataset train_set, test_set;
    for (const auto& row : rows) {
        const img::RgbImage patch = img::load_image((out / row.path).string());
        auto& ds = split.is_test(row.slide_id) ? test_set : train_set;
        ds.inputs.push_back(img::image_to_tensor(img::resize_bilinear(patch, side, side)));
        ds.labels.push_back(label_index(config.parent_labels, row.parent_label, "parent"));
    }
    if (train_set.inputs.empty() || test_set.inputs.empty()) {
        throw StateError("slide split left an empty train or test set");
    }

    const auto members = rmdl::sample_ensemble(config.ensemble_spec());
    const auto ensemble = rmdl::train_ensemble(members, train_set, config.ensemble.epochs);

    fs::create_directories(out / "models");
    fs::create_directories(out / "curves");
    ordered_json summary;
    ordered_json member_rows = ordered_json::array();
    std::vector<double> member_acc;
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        const auto& m = ensemble.members[i];
        io::Checkpoint ck;
        ck.spec = m.spec.network;
        ck.params = m.params;
        io::save_checkpoint(ck, (out / "models" / ("rmdl_member_" + std::to_string(i) + ".ckpt")).string());
        train::write_curve_csv(m.history.curve,
                               (out / "curves" / ("rmdl_member_" + std::to_string(i) + ".csv")).string());
        const double acc = train::evaluate_accuracy(m.spec.network, m.params, test_set);
        member_acc.push_back(acc);
        ordered_json row;
        row["index"] = i;
        row["family"] = rmdl::family_name(m.spec.family);
        row["optimizer"] = optim::optimizer_kind_name(m.spec.optimizer.kind);
        row["parameters"] = nn::network_parameter_count(m.spec.network);
        row["train_accuracy"] = m.history.curve.empty() ? 0.0 : m.history.curve.back().accuracy;
        row["test_accuracy"] = acc;
        row["reinitialized"] = m.history.reinitialized;
        member_rows.push_back(std::move(row));
    }

    long long correct = 0;
    for (std::size_t i = 0; i < test_set.inputs.size(); ++i) {
        if (rmdl::ensemble_predict(ensemble, test_set.inputs[i]) == test_set.labels[i]) ++correct;
    }
    const double ensemble_acc = static_cast<double>(correct) / static_cast<double>(test_set.size());
    std::vector<double> sorted_acc = member_acc;
    std::sort(sorted_acc.begin(), sorted_acc.end());
    const double median = sorted_acc[sorted_acc.size() / 2];

    summary["members"] = std::move(member_rows);
    summary["ensemble_test_accuracy"] = ensemble_acc;
    summary["median_member_test_accuracy"] = median;
    summary["train_samples"] = train_set.size();
    summary["test_samples"] = test_set.size();
    std::ofstream((out / "rmdl_summary.json").string()) << summary.dump(2) << "\n";
    std::cout << "train-rmdl: ensemble test accuracy " << ensemble_acc << " vs median member "
              << median << "\n";
}

void run_predict(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "models" / "parent.ckpt", "train-parent");
    require_artifact(out / "models" / "child.ckpt", "train-child");
    const auto rows = useful_rows(config);
    require_artifact(out / "manifest.csv", "synth");
    const auto manifest = io::load_manifest((out / "manifest.csv").string(), config.routed_parent);
    const auto split = io::split_slides(manifest, config.seed, config.test_fraction);

    const auto parent_ck = io::load_checkpoint((out / "models" / "parent.ckpt").string());
    const auto child_ck = io::load_checkpoint((out / "models" / "child.ckpt").string());
    const auto hierarchy = config.hierarchy_config();
    hmic::HierarchyModels models;
    models.parent = hmic::make_network_classifier({parent_ck.spec, parent_ck.params});
    models.child = hmic::make_network_classifier({child_ck.spec, child_ck.params});

    std::vector<PatchIndexRow> test_rows;
    for (const auto& r : rows) {
        if (split.is_test(r.slide_id)) test_rows.push_back(r);
    }
    std::sort(test_rows.begin(), test_rows.end(), [](const PatchIndexRow& a, const PatchIndexRow& b) {
        if (a.slide_id != b.slide_id) return a.slide_id < b.slide_id;
        if (a.origin_y != b.origin_y) return a.origin_y < b.origin_y;
        return a.origin_x < b.origin_x;
    });
    if (test_rows.empty()) throw StateError("no test patches; adjust test_fraction");

    std::vector<io::PredictionRecord> records;
    records.reserve(test_rows.size());
    for (const auto& r : test_rows) {
        const img::RgbImage patch = img::load_image((out / r.path).string());
        const auto pred = hmic::hmic_predict_patch(hierarchy, models, patch);
        io::PredictionRecord rec;
        rec.slide_id = r.slide_id;
        rec.origin_x = r.origin_x;
        rec.origin_y = r.origin_y;
        rec.true_parent = r.parent_label;
        rec.true_child = r.child_label;
        rec.pred_parent = config.parent_labels[static_cast<std::size_t>(pred.parent_label)];
        if (pred.child_label) {
            rec.pred_child = config.child_labels[static_cast<std::size_t>(*pred.child_label)];
        }
        rec.parent_probs = pred.parent_probs;
        rec.child_probs = pred.child_probs;
        records.push_back(std::move(rec));
    }
    io::save_predictions(records, (out / "predictions.csv").string());
    std::cout << "predict: " << records.size() << " test patches over " << split.test.size()
              << " slides\n";
}

void run_evaluate(const RunConfig& config) {
    const fs::path out(config.out);
    require_artifact(out / "predictions.csv", "predict");
    const auto records = io::load_predictions((out / "predictions.csv").string());
    const auto hierarchy = config.hierarchy_config();

    const std::string report = io::build_report_json(hierarchy, records, (out / "roc").string());
    std::ofstream((out / "report.json").string()) << report;

    // Per-slide rows as CSV alongside the JSON.
    {
        const auto parsed = nlohmann::json::parse(report);
        std::ofstream csv((out / "slide_report.csv").string());
        csv << "slide_id,n_patches,parent_label,parent_sums,child_label,child_sums\n";
        for (const auto& row : parsed.at("slide_level")) {
            std::string psums, csums;
            char buf[32];
            for (const auto& v : row.at("parent_sums")) {
                std::snprintf(buf, sizeof(buf), "%.9g", v.get<double>());
                if (!psums.empty()) psums += ';';
                psums += buf;
            }
            for (const auto& v : row.at("child_sums")) {
                std::snprintf(buf, sizeof(buf), "%.9g", v.get<double>());
                if (!csums.empty()) csums += ';';
                csums += buf;
            }
            csv << row.at("slide_id").get<std::string>() << ',' << row.at("n_patches").get<int>()
                << ',' << row.at("parent_label").get<std::string>() << ',' << psums << ','
                << row.at("child_label").get<std::string>() << ',' << (csums.empty() ? "-" : csums)
                << '\n';
        }
    }

    // Console table of the per-class rows.
    const auto parsed = nlohmann::json::parse(report);
    std::cout << "evaluate: per-class scores\n";
    std::printf("  %-10s %-10s %-10s %-10s\n", "class", "precision", "recall", "f1");
    for (const auto& [label, scores] : parsed.at("per_class").items()) {
        auto fmt = [&](const char* key) {
            return scores.at(key).is_null() ? std::string("undef")
                                            : std::to_string(scores.at(key).get<double>()).substr(0, 6);
        };
        std::printf("  %-10s %-10s %-10s %-10s\n", label.c_str(), fmt("precision").c_str(),
                    fmt("recall").c_str(), fmt("f1").c_str());
    }
    std::cout << "  parent accuracy " << parsed.at("parent_accuracy").get<double>()
              << ", joint accuracy " << parsed.at("joint_accuracy").get<double>() << "\n"
              << "  report.json, slide_report.csv and roc/*.csv written to " << config.out << "\n";
}

}  // namespace histokit::cli
