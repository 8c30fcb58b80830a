#include "histokit/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace histokit::img {

int PatchSpec::stride() const {
    return static_cast<int>(std::lround(patch_size * (1.0 - overlap_fraction)));
}

void PatchSpec::validate() const {
    if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
    if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
        throw ConfigError("overlap_fraction must be in [0, 1)");
    }
    if (stride() < 1) throw ConfigError("patch stride rounds to zero; lower the overlap");
}

void ColorBalanceParams::validate() const {
    if (!(alpha > 0)) throw ConfigError("color balance alpha must be > 0");
    if (!(gamma > 0)) throw ConfigError("color balance gamma must be > 0");
    for (const double g : gains) {
        if (!(g > 0) || !std::isfinite(g)) throw ConfigError("color balance gains must be > 0");
    }
    for (const auto& row : matrix) {
        for (const double v : row) {
            if (!std::isfinite(v)) throw ConfigError("color balance matrix must be finite");
        }
    }
}

void StainNormParams::validate() const {
    for (const double s : target_std) {
        if (!(s > 0)) throw ConfigError("stain norm target std must be > 0");
    }
}

std::vector<int> patch_origins(int image_extent, int patch_size, int stride) {
    std::vector<int> origins;
    for (int o = 0; o + patch_size <= image_extent; o += stride) origins.push_back(o);
    const int last = image_extent - patch_size;
    if (origins.empty() || origins.back() != last) origins.push_back(last);
    return origins;
}

std::vector<Patch> extract_patches(const RgbImage& image, const PatchSpec& spec,
                                   const std::string& slide_id) {
    spec.validate();
    if (spec.patch_size > image.width || spec.patch_size > image.height) {
        throw DimensionError("patch size " + std::to_string(spec.patch_size) +
                             " exceeds image " + std::to_string(image.width) + "x" +
                             std::to_string(image.height));
    }
    const int stride = spec.stride();
    const std::vector<int> xs = patch_origins(image.width, spec.patch_size, stride);
    const std::vector<int> ys = patch_origins(image.height, spec.patch_size, stride);

    std::vector<Patch> patches;
    patches.reserve(xs.size() * ys.size());
    for (const int oy : ys) {
        for (const int ox : xs) {
            Patch p;
            p.slide_id = slide_id;
            p.origin_x = ox;
            p.origin_y = oy;
            p.image = RgbImage(spec.patch_size, spec.patch_size);
            for (int y = 0; y < spec.patch_size; ++y) {
                const std::uint8_t* src =
                    image.pixels.data() + (static_cast<std::size_t>(oy + y) * image.width + ox) * 3;
                std::uint8_t* dst =
                    p.image.pixels.data() + static_cast<std::size_t>(y) * spec.patch_size * 3;
                std::copy(src, src + static_cast<std::size_t>(spec.patch_size) * 3, dst);
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

namespace {

std::uint8_t quantize(double v01) {
    // Round half up after clamping to [0,1].
    const double v = std::min(1.0, std::max(0.0, v01));
    return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

}  // namespace

std::array<double, 3> color_balance_pixel(const std::array<double, 3>& rgb,
                                          const ColorBalanceParams& params) {
    std::array<double, 3> gained{rgb[0] * params.gains[0], rgb[1] * params.gains[1],
                                 rgb[2] * params.gains[2]};
    std::array<double, 3> out{};
    for (int r = 0; r < 3; ++r) {
        double v = 0.0;
        for (int c = 0; c < 3; ++c) v += params.matrix[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] * gained[static_cast<std::size_t>(c)];
        v *= params.alpha;
        v = std::max(0.0, v);  // keep the gamma power real
        out[static_cast<std::size_t>(r)] = std::pow(v, params.gamma);
    }
    return out;
}

RgbImage color_balance(const RgbImage& image, const ColorBalanceParams& params) {
    params.validate();
    RgbImage out(image.width, image.height);
    const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
    const bool identity_gamma = params.gamma == 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::array<double, 3> in{image.pixels[i * 3] / 255.0, image.pixels[i * 3 + 1] / 255.0,
                                       image.pixels[i * 3 + 2] / 255.0};
        std::array<double, 3> v;
        if (identity_gamma) {
            // pow(x, 1.0) is exact anyway; skip the call for speed.
            std::array<double, 3> gained{in[0] * params.gains[0], in[1] * params.gains[1],
                                         in[2] * params.gains[2]};
            for (int r = 0; r < 3; ++r) {
                double acc = 0.0;
                for (int c = 0; c < 3; ++c) acc += params.matrix[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] * gained[static_cast<std::size_t>(c)];
                v[static_cast<std::size_t>(r)] = std::max(0.0, acc * params.alpha);
            }
        } else {
            v = color_balance_pixel(in, params);
        }
        out.pixels[i * 3] = quantize(v[0]);
        out.pixels[i * 3 + 1] = quantize(v[1]);
        out.pixels[i * 3 + 2] = quantize(v[2]);
    }
    return out;
}

ColorBalanceParams balance_level_params(double percentage,
                                        const std::array<double, 3>& reference_gains) {
    if (percentage < 0) throw DomainError("balance percentage must be >= 0");
    ColorBalanceParams p = ColorBalanceParams::identity();
    const double t = percentage / 100.0;
    for (int c = 0; c < 3; ++c) {
        p.gains[static_cast<std::size_t>(c)] =
            1.0 + t * (reference_gains[static_cast<std::size_t>(c)] - 1.0);
    }
    p.validate();
    return p;
}

namespace {

double to_od(std::uint8_t v) { return -std::log((static_cast<double>(v) + 1.0) / 256.0); }

std::uint8_t from_od(double od) {
    const double v = 256.0 * std::exp(-od) - 1.0;
    return static_cast<std::uint8_t>(std::floor(std::min(255.0, std::max(0.0, v)) + 0.5));
}

}  // namespace

StainNormParams compute_stain_stats(const RgbImage& image) {
    if (image.pixels.empty()) throw DimensionError("stain stats on empty image");
    StainNormParams stats;
    const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += to_od(image.pixels[i * 3 + static_cast<std::size_t>(c)]);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = to_od(image.pixels[i * 3 + static_cast<std::size_t>(c)]) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        stats.target_mean[static_cast<std::size_t>(c)] = mean;
        stats.target_std[static_cast<std::size_t>(c)] = std::sqrt(var);
    }
    return stats;
}

RgbImage stain_normalize(const RgbImage& image, const StainNormParams& params) {
    params.validate();
    if (image.pixels.empty()) throw DimensionError("stain_normalize on empty image");
    const StainNormParams src = compute_stain_stats(image);
    RgbImage out(image.width, image.height);
    const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
    for (int c = 0; c < 3; ++c) {
        const std::size_t ci = static_cast<std::size_t>(c);
        if (src.target_std[ci] < 1e-12) {
            // Zero-variance channel: pass through unchanged.
            for (std::size_t i = 0; i < n; ++i) out.pixels[i * 3 + ci] = image.pixels[i * 3 + ci];
            continue;
        }
        const double scale = params.target_std[ci] / src.target_std[ci];
        for (std::size_t i = 0; i < n; ++i) {
            const double od = to_od(image.pixels[i * 3 + ci]);
            const double mapped = (od - src.target_mean[ci]) * scale + params.target_mean[ci];
            out.pixels[i * 3 + ci] = from_od(mapped);
        }
    }
    return out;
}

RgbImage resize_bilinear(const RgbImage& image, int target_w, int target_h) {
    if (target_w < 1 || target_h < 1) throw DimensionError("resize target must be >= 1");
    if (target_w == image.width && target_h == image.height) return image;
    RgbImage out(target_w, target_h);
    for (int y = 0; y < target_h; ++y) {
        const double sy = target_h > 1
                              ? static_cast<double>(y) * (image.height - 1) / (target_h - 1)
                              : (image.height - 1) / 2.0;
        const int y0 = std::min(static_cast<int>(sy), image.height - 1);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < target_w; ++x) {
            const double sx = target_w > 1
                                  ? static_cast<double>(x) * (image.width - 1) / (target_w - 1)
                                  : (image.width - 1) / 2.0;
            const int x0 = std::min(static_cast<int>(sx), image.width - 1);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < 3; ++c) {
                const double v = (1 - fy) * ((1 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c)) +
                                 fy * ((1 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c));
                out.at(x, y, c) = static_cast<std::uint8_t>(std::floor(v + 0.5));
            }
        }
    }
    return out;
}

}  // namespace histokit::img
