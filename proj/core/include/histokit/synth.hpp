#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histokit/image.hpp"
#include "histokit/manifest.hpp"

namespace histokit::synth {

inline const std::vector<std::string> kParentClasses{"Normal", "EE", "CD"};
inline const std::vector<std::string> kChildClasses{"I", "IIIa", "IIIb", "IIIc"};

struct SynthConfig {
    std::uint64_t seed = 1;
    int slides_per_class = 6;  // per parent class; CD slides cycle the child classes
    int image_size = 192;
    std::string out_dir;
};

// Procedural tissue-like texture. Parent classes differ in blob density,
// size, and contrast; CD slides additionally carry sinusoidal striping
// whose frequency encodes the child class (child_index < 0 for non-CD).
img::RgbImage render_slide_texture(int parent_index, int child_index, int image_size,
                                   std::uint64_t seed);

struct SynthResult {
    std::vector<io::ManifestRecord> records;
    std::string manifest_path;
};

// Writes images/<slide_id>.ppm plus manifest.csv under out_dir; byte
// identical for identical seeds.
SynthResult generate_synthetic_dataset(const SynthConfig& config);

}  // namespace histokit::synth
