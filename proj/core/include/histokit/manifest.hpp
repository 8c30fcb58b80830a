#pragma once

#include <string>
#include <vector>

#include "histokit/error.hpp"

namespace histokit::io {

// One slide: id, raster path, parent label, and a child label present iff
// the parent is the routed class.
struct ManifestRecord {
    std::string slide_id;
    std::string image_path;
    std::string parent_label;
    std::string child_label;  // empty when absent

    bool operator==(const ManifestRecord&) const = default;
};

// CSV with header slide_id,path,parent_label,child_label. Rejects duplicate
// slide ids, child labels on non-routed parents, and (when check_paths)
// unresolvable image paths; parse errors carry the line number. Relative
// paths resolve against the manifest's directory.
std::vector<ManifestRecord> load_manifest(const std::string& path,
                                          const std::string& routed_parent = "CD",
                                          bool check_paths = true);

void save_manifest(const std::vector<ManifestRecord>& records, const std::string& path);

}  // namespace histokit::io
