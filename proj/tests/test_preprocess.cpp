#include <doctest.h>

#include <vector>

#include "histokit/preprocess.hpp"
#include "histokit/rng.hpp"

using namespace histokit;
using img::ColorBalanceParams;
using img::PatchSpec;
using img::RgbImage;

namespace {

RgbImage random_image(int w, int h, std::uint64_t seed) {
    RgbImage image(w, h);
    Rng rng(seed);
    for (auto& p : image.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return image;
}

}  // namespace

TEST_CASE("extract_patches origin counts") {
    SUBCASE("1000x1000, size 500, overlap 0.5 -> 9 patches") {
        const auto origins = img::patch_origins(1000, 500, 250);
        CHECK(origins == std::vector<int>{0, 250, 500});
        const auto patches = img::extract_patches(random_image(1000, 1000, 1), {500, 0.5});
        CHECK(patches.size() == 9);
    }
    SUBCASE("image size equals patch size -> single patch at origin") {
        const auto patches = img::extract_patches(random_image(64, 64, 2), {64, 0.5});
        REQUIRE(patches.size() == 1);
        CHECK(patches[0].origin_x == 0);
        CHECK(patches[0].origin_y == 0);
    }
    SUBCASE("1000x1000, size 500, overlap 0 -> exact 2x2 tiling") {
        const auto patches = img::extract_patches(random_image(1000, 1000, 3), {500, 0.0});
        CHECK(patches.size() == 4);
    }
    SUBCASE("patch larger than image") {
        CHECK_THROWS_AS(img::extract_patches(random_image(32, 32, 4), {64, 0.5}), DimensionError);
    }
    SUBCASE("border coverage with a non-dividing stride") {
        // 70 wide, patch 32, stride 16: last window is end-aligned at 38.
        const auto origins = img::patch_origins(70, 32, 16);
        CHECK(origins.back() == 38);
        // Every pixel covered by at least one window.
        std::vector<int> cover(70, 0);
        for (const int o : origins) {
            for (int i = o; i < o + 32; ++i) cover[static_cast<std::size_t>(i)]++;
        }
        for (const int c : cover) CHECK(c >= 1);
    }
    SUBCASE("interior pixels are covered >= 4 times at 50% overlap") {
        const RgbImage image = random_image(64, 64, 5);
        const auto patches = img::extract_patches(image, {16, 0.5});
        std::vector<int> cover(static_cast<std::size_t>(64 * 64), 0);
        for (const auto& p : patches) {
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x)
                    cover[static_cast<std::size_t>(p.origin_y + y) * 64 +
                          static_cast<std::size_t>(p.origin_x + x)]++;
        }
        for (int y = 16; y < 48; ++y) {
            for (int x = 16; x < 48; ++x) {
                CHECK(cover[static_cast<std::size_t>(y) * 64 + x] >= 4);
            }
        }
    }
    SUBCASE("patch content matches the source crop") {
        const RgbImage image = random_image(40, 30, 6);
        const auto patches = img::extract_patches(image, {16, 0.25}, "slide-1");
        for (const auto& p : patches) {
            CHECK(p.slide_id == "slide-1");
            for (int y = 0; y < 4; ++y) {
                for (int x = 0; x < 4; ++x) {
                    CHECK(p.image.at(x, y, 0) == image.at(p.origin_x + x, p.origin_y + y, 0));
                }
            }
        }
    }
}

TEST_CASE("color balance") {
    SUBCASE("identity params are the bit-exact identity") {
        const RgbImage image = random_image(31, 17, 7);
        const RgbImage out = img::color_balance(image, ColorBalanceParams::identity());
        CHECK(out == image);
    }
    SUBCASE("alpha doubles channel values") {
        ColorBalanceParams p;
        p.alpha = 2.0;
        const auto out = img::color_balance_pixel({0.25, 0.25, 0.25}, p);
        for (const double v : out) CHECK(v == doctest::Approx(0.5));
    }
    SUBCASE("gamma is a power law") {
        ColorBalanceParams p;
        p.gamma = 2.0;
        const auto out = img::color_balance_pixel({0.5, 0.5, 0.5}, p);
        for (const double v : out) CHECK(v == doctest::Approx(0.25));
    }
    SUBCASE("output always quantizes into [0,255]") {
        ColorBalanceParams p;
        p.alpha = 9.0;  // saturates most pixels
        p.gains = {3.0, 0.1, 1.0};
        const RgbImage out = img::color_balance(random_image(16, 16, 8), p);
        CHECK(out.pixels.size() == 16 * 16 * 3);  // clamping absorbed the overflow
    }
}

TEST_CASE("balance_level_params interpolation") {
    const std::array<double, 3> ref{2.0, 1.0, 0.5};
    SUBCASE("p = 0 is identity") {
        const auto p = img::balance_level_params(0.0, ref);
        CHECK(p.gains[0] == 1.0);
        CHECK(p.gains[1] == 1.0);
        CHECK(p.gains[2] == 1.0);
        CHECK(p.alpha == 1.0);
        CHECK(p.gamma == 1.0);
    }
    SUBCASE("p = 100 reaches the reference gains exactly") {
        const auto p = img::balance_level_params(100.0, ref);
        CHECK(p.gains[0] == 2.0);
        CHECK(p.gains[1] == 1.0);
        CHECK(p.gains[2] == 0.5);
    }
    SUBCASE("p = 50 is the midpoint") {
        const auto p = img::balance_level_params(50.0, ref);
        CHECK(p.gains[0] == doctest::Approx(1.5));
        CHECK(p.gains[1] == doctest::Approx(1.0));
        CHECK(p.gains[2] == doctest::Approx(0.75));
    }
    SUBCASE("negative percentage is a domain error") {
        CHECK_THROWS_AS(img::balance_level_params(-1.0, ref), DomainError);
    }
}

TEST_CASE("stain normalization") {
    SUBCASE("self statistics reproduce the image") {
        const RgbImage image = random_image(24, 24, 9);
        const auto stats = img::compute_stain_stats(image);
        const RgbImage out = img::stain_normalize(image, stats);
        for (std::size_t i = 0; i < image.pixels.size(); ++i) {
            CHECK(std::abs(static_cast<int>(out.pixels[i]) - static_cast<int>(image.pixels[i])) <= 1);
        }
    }
    SUBCASE("constant image passes through") {
        RgbImage image(8, 8);
        for (auto& p : image.pixels) p = 137;
        img::StainNormParams params;
        params.target_mean = {0.5, 0.5, 0.5};
        params.target_std = {0.25, 0.25, 0.25};
        const RgbImage out = img::stain_normalize(image, params);
        CHECK(out == image);
    }
    SUBCASE("OD-shifted copies normalize to the same output") {
        // B = 2A + 1 shifts every channel's OD by exactly -ln 2.
        RgbImage a(16, 16);
        Rng rng(10);
        for (auto& p : a.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(10, 120));
        RgbImage b(16, 16);
        for (std::size_t i = 0; i < a.pixels.size(); ++i) {
            b.pixels[i] = static_cast<std::uint8_t>(2 * a.pixels[i] + 1);
        }
        img::StainNormParams target;
        target.target_mean = {1.2, 1.2, 1.2};
        target.target_std = {0.4, 0.4, 0.4};
        const RgbImage na = img::stain_normalize(a, target);
        const RgbImage nb = img::stain_normalize(b, target);
        for (std::size_t i = 0; i < na.pixels.size(); ++i) {
            CHECK(std::abs(static_cast<int>(na.pixels[i]) - static_cast<int>(nb.pixels[i])) <= 1);
        }
    }
    SUBCASE("idempotent within one quantization level") {
        const RgbImage image = random_image(20, 20, 11);
        img::StainNormParams target;
        target.target_mean = {1.0, 1.1, 0.9};
        target.target_std = {0.3, 0.35, 0.4};
        const RgbImage once = img::stain_normalize(image, target);
        const RgbImage twice = img::stain_normalize(once, target);
        for (std::size_t i = 0; i < once.pixels.size(); ++i) {
            CHECK(std::abs(static_cast<int>(twice.pixels[i]) - static_cast<int>(once.pixels[i])) <= 1);
        }
    }
}

TEST_CASE("bilinear resize") {
    SUBCASE("same size is the identity") {
        const RgbImage image = random_image(13, 9, 12);
        CHECK(img::resize_bilinear(image, 13, 9) == image);
    }
    SUBCASE("2x2 checkerboard to 1x1 averages to 128") {
        RgbImage image(2, 2);
        image.at(0, 0, 0) = image.at(0, 0, 1) = image.at(0, 0, 2) = 0;
        image.at(1, 0, 0) = image.at(1, 0, 1) = image.at(1, 0, 2) = 255;
        image.at(0, 1, 0) = image.at(0, 1, 1) = image.at(0, 1, 2) = 255;
        image.at(1, 1, 0) = image.at(1, 1, 1) = image.at(1, 1, 2) = 0;
        const RgbImage out = img::resize_bilinear(image, 1, 1);
        CHECK(out.at(0, 0, 0) == 128);  // round-half-up of 127.5
    }
    SUBCASE("constant image stays constant at any size") {
        RgbImage image(5, 7);
        for (auto& p : image.pixels) p = 99;
        const RgbImage out = img::resize_bilinear(image, 23, 3);
        for (const auto p : out.pixels) CHECK(p == 99);
    }
}
