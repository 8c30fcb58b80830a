#include "histokit/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace histokit::io {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::vector<ManifestRecord> load_manifest(const std::string& path, const std::string& routed_parent,
                                          bool check_paths) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest " + path);
    const fs::path base = fs::path(path).parent_path();

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file, expected header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "slide_id,path,parent_label,child_label") {
        throw FormatError(path + ": line 1: bad header '" + line + "'");
    }

    std::vector<ManifestRecord> records;
    std::set<std::string> seen;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 4) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": expected 4 fields, got " +
                              std::to_string(fields.size()));
        }
        ManifestRecord r{fields[0], fields[1], fields[2], fields[3]};
        if (r.slide_id.empty() || r.image_path.empty() || r.parent_label.empty()) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": empty required field");
        }
        if (!seen.insert(r.slide_id).second) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": duplicate slide_id '" +
                              r.slide_id + "'");
        }
        const bool routed = r.parent_label == routed_parent;
        if (routed && r.child_label.empty()) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": slide '" + r.slide_id +
                              "' is " + routed_parent + " but has no child label");
        }
        if (!routed && !r.child_label.empty()) {
            throw FormatError(path + ": line " + std::to_string(line_no) + ": slide '" + r.slide_id +
                              "' has child label '" + r.child_label + "' on non-routed parent '" +
                              r.parent_label + "'");
        }
        if (check_paths) {
            const fs::path img = fs::path(r.image_path).is_absolute() ? fs::path(r.image_path)
                                                                      : base / r.image_path;
            if (!fs::exists(img)) {
                throw FormatError(path + ": line " + std::to_string(line_no) + ": image path '" +
                                  r.image_path + "' does not resolve");
            }
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write manifest " + path);
    out << "slide_id,path,parent_label,child_label\n";
    for (const ManifestRecord& r : records) {
        for (const std::string* f : {&r.slide_id, &r.image_path, &r.parent_label, &r.child_label}) {
            if (f->find(',') != std::string::npos || f->find('\n') != std::string::npos) {
                throw FormatError("manifest fields must not contain commas or newlines: '" + *f + "'");
            }
        }
        out << r.slide_id << ',' << r.image_path << ',' << r.parent_label << ',' << r.child_label
            << '\n';
    }
}

}  // namespace histokit::io
