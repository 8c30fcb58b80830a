#include "histokit/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "histokit/rng.hpp"

namespace histokit::synth {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Blob {
    double cx, cy, radius;
};

struct ClassRecipe {
    int blob_count;
    double radius_lo, radius_hi;  // fraction of image size
    double blob_rgb[3];           // blob core color
    double stripe_amplitude;      // 0 = no stripes
};

// Normal: few large, high-contrast blobs. EE: many small, faint blobs.
// CD: medium blobs plus child-class striping.
ClassRecipe recipe_for(int parent_index) {
    switch (parent_index) {
        case 0: return {6, 1.0 / 7.0, 1.0 / 5.0, {90, 60, 110}, 0.0};
        case 1: return {90, 1.0 / 50.0, 1.0 / 30.0, {195, 170, 190}, 0.0};
        default: return {22, 1.0 / 18.0, 1.0 / 12.0, {150, 95, 150}, 0.35};
    }
}

// Stripe cycles across the image per child class; pronounced enough to
// survive 64x64 patching.
double child_stripe_frequency(int child_index) {
    static const double freq[4] = {2.0, 5.0, 10.0, 20.0};
    return freq[child_index < 0 ? 0 : child_index % 4];
}

}  // namespace

img::RgbImage render_slide_texture(int parent_index, int child_index, int image_size,
                                   std::uint64_t seed) {
    if (parent_index < 0 || parent_index >= static_cast<int>(kParentClasses.size())) {
        throw DomainError("parent class index out of range");
    }
    if (parent_index == 2 && (child_index < 0 || child_index >= 4)) {
        throw DomainError("CD slides need a child class index");
    }
    Rng rng(seed);
    const ClassRecipe recipe = recipe_for(parent_index);
    const double s = static_cast<double>(image_size);

    // Background jitter keeps slides of one class distinct.
    const double bg[3] = {232 + rng.uniform(-6, 6), 208 + rng.uniform(-6, 6),
                          216 + rng.uniform(-6, 6)};

    const int blob_count = recipe.blob_count + rng.uniform_int(-recipe.blob_count / 5,
                                                               recipe.blob_count / 5);
    std::vector<Blob> blobs;
    blobs.reserve(static_cast<std::size_t>(blob_count));
    for (int i = 0; i < blob_count; ++i) {
        blobs.push_back({rng.uniform(0, s), rng.uniform(0, s),
                         rng.uniform(recipe.radius_lo * s, recipe.radius_hi * s)});
    }

    const double stripe_freq = child_stripe_frequency(child_index);
    const double stripe_theta = rng.uniform(0, 2 * kPi);
    const double stripe_phase = rng.uniform(0, 2 * kPi);
    const double stripe_dx = std::cos(stripe_theta);
    const double stripe_dy = std::sin(stripe_theta);

    img::RgbImage image(image_size, image_size);
    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            // Soft-edged blob coverage, saturating across overlaps.
            double cover = 0.0;
            for (const Blob& b : blobs) {
                const double dx = x - b.cx, dy = y - b.cy;
                const double d = std::sqrt(dx * dx + dy * dy);
                if (d < b.radius) {
                    const double t = 1.0 - d / b.radius;
                    cover = std::max(cover, std::min(1.0, t * 2.0));
                }
            }
            double rgb[3];
            for (int c = 0; c < 3; ++c) rgb[c] = bg[c] + cover * (recipe.blob_rgb[c] - bg[c]);

            if (recipe.stripe_amplitude > 0.0) {
                const double phase =
                    2 * kPi * stripe_freq * (x * stripe_dx + y * stripe_dy) / s + stripe_phase;
                const double shade = 1.0 - recipe.stripe_amplitude * (0.5 + 0.5 * std::sin(phase));
                for (int c = 0; c < 3; ++c) rgb[c] *= shade;
            }

            for (int c = 0; c < 3; ++c) {
                const double v = std::min(255.0, std::max(0.0, rgb[c]));
                image.at(x, y, c) = static_cast<std::uint8_t>(std::floor(v + 0.5));
            }
        }
    }
    return image;
}

SynthResult generate_synthetic_dataset(const SynthConfig& config) {
    if (config.slides_per_class < 1) throw ConfigError("slides_per_class must be >= 1");
    if (config.image_size < 8) throw ConfigError("image_size too small");
    if (config.out_dir.empty()) throw ConfigError("synth out_dir is required");

    fs::create_directories(fs::path(config.out_dir) / "images");

    SynthResult result;
    char name[64];
    for (int parent = 0; parent < static_cast<int>(kParentClasses.size()); ++parent) {
        for (int i = 0; i < config.slides_per_class; ++i) {
            const int child = parent == 2 ? i % 4 : -1;
            std::snprintf(name, sizeof(name), "%s_%03d", kParentClasses[static_cast<std::size_t>(parent)].c_str(), i);
            const std::uint64_t slide_seed =
                stage_seed(config.seed, "synth", static_cast<std::uint64_t>(parent * 10000 + i));
            const img::RgbImage image =
                render_slide_texture(parent, child, config.image_size, slide_seed);

            const std::string rel = std::string("images/") + name + ".ppm";
            img::write_ppm(image, (fs::path(config.out_dir) / rel).string());

            io::ManifestRecord rec;
            rec.slide_id = name;
            rec.image_path = rel;
            rec.parent_label = kParentClasses[static_cast<std::size_t>(parent)];
            rec.child_label = child >= 0 ? kChildClasses[static_cast<std::size_t>(child)] : "";
            result.records.push_back(std::move(rec));
        }
    }
    result.manifest_path = (fs::path(config.out_dir) / "manifest.csv").string();
    io::save_manifest(result.records, result.manifest_path);
    return result;
}

}  // namespace histokit::synth
