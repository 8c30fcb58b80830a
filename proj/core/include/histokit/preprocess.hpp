#pragma once

#include <array>
#include <string>
#include <vector>

#include "histokit/image.hpp"

namespace histokit::img {

// Square sliding-window tiling plan.
struct PatchSpec {
    int patch_size = 500;
    double overlap_fraction = 0.5;

    int stride() const;
    void validate() const;
};

// An RGB crop with slide provenance.
struct Patch {
    RgbImage image;
    std::string slide_id;
    int origin_x = 0;
    int origin_y = 0;
};

// out = (alpha * A * diag(gains) * in)^gamma per pixel, channels in [0,1].
struct ColorBalanceParams {
    double alpha = 1.0;
    std::array<std::array<double, 3>, 3> matrix{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    std::array<double, 3> gains{1.0, 1.0, 1.0};
    double gamma = 1.0;

    static ColorBalanceParams identity() { return {}; }
    void validate() const;
};

// Per-channel target statistics in optical-density space.
struct StainNormParams {
    std::array<double, 3> target_mean{0.0, 0.0, 0.0};
    std::array<double, 3> target_std{1.0, 1.0, 1.0};

    void validate() const;
};

// Sliding-window positions at stride multiples plus an end-aligned window
// per axis, so every border pixel is covered. Output is row-major by origin.
std::vector<Patch> extract_patches(const RgbImage& image, const PatchSpec& spec,
                                   const std::string& slide_id = "");

// The sampled origins along one axis (exposed for tests).
std::vector<int> patch_origins(int image_extent, int patch_size, int stride);

// One pixel through the balance transform, channels in [0,1]. Negative
// linear values clamp to 0 before the gamma power.
std::array<double, 3> color_balance_pixel(const std::array<double, 3>& rgb,
                                          const ColorBalanceParams& params);

// Whole-image balance; identity params reproduce the input bit-exactly.
RgbImage color_balance(const RgbImage& image, const ColorBalanceParams& params);

// Fixed reference illuminant gains used by the percentage knob.
inline constexpr std::array<double, 3> kGrayWorldReferenceGains{1.2, 1.0, 0.8};

// Maps the balancing "percentage" p to params: identity at p = 0, the
// reference gains at p = 100, linear in between (and beyond).
ColorBalanceParams balance_level_params(double percentage,
                                        const std::array<double, 3>& reference_gains =
                                            kGrayWorldReferenceGains);

// Per-channel mean/std of the image in OD space; use as a target for
// stain_normalize.
StainNormParams compute_stain_stats(const RgbImage& image);

// od = -ln((v+1)/256) per channel, shifted/scaled to the target stats,
// inverted and requantized. Constant channels pass through unchanged.
RgbImage stain_normalize(const RgbImage& image, const StainNormParams& params);

// Corner-aligned bilinear resampling.
RgbImage resize_bilinear(const RgbImage& image, int target_w, int target_h);

}  // namespace histokit::img
