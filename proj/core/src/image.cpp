#include "histokit/image.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <memory>

namespace histokit::img {

Tensor image_to_tensor(const RgbImage& image) {
    Tensor t({image.height, image.width, 3});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        t.data[i] = static_cast<float>(image.pixels[i]) / 255.0f;
    }
    return t;
}

RgbImage tensor_to_image(const Tensor& t) {
    if (t.rank() != 3 || t.shape[2] != 3) throw DimensionError("tensor_to_image needs [H,W,3]");
    RgbImage img(t.shape[1], t.shape[0]);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float v = std::min(1.0f, std::max(0.0f, t.data[i]));
        img.pixels[i] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
    }
    return img;
}

namespace {

int next_ppm_token(std::istream& in) {
    // Skips whitespace and '#' comments, returns the next integer.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw FormatError("ppm: unexpected end of header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace

RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '6') throw FormatError(path + ": not a binary PPM (P6)");
    const int w = next_ppm_token(in);
    const int h = next_ppm_token(in);
    const int maxval = next_ppm_token(in);
    if (w <= 0 || h <= 0) throw FormatError(path + ": bad dimensions");
    if (maxval != 255) throw FormatError(path + ": only maxval 255 supported");
    RgbImage img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw FormatError(path + ": truncated pixel data");
    }
    return img;
}

void write_ppm(const RgbImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw FormatError("failed writing " + path);
}

RgbImage read_png(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!fp) throw FormatError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw FormatError("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw FormatError("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path + ": png decode error");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    RgbImage img(w, h);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const RgbImage& image, const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw FormatError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw FormatError("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw FormatError("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError(path + ": png encode error");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() +
                                                 static_cast<std::size_t>(y) * image.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

RgbImage load_image(const std::string& path) {
    if (ends_with(path, ".ppm")) return read_ppm(path);
    if (ends_with(path, ".png")) return read_png(path);
    throw FormatError(path + ": unsupported image extension (use .ppm or .png)");
}

void save_image(const RgbImage& image, const std::string& path) {
    if (ends_with(path, ".ppm")) {
        write_ppm(image, path);
    } else if (ends_with(path, ".png")) {
        write_png(image, path);
    } else {
        throw FormatError(path + ": unsupported image extension (use .ppm or .png)");
    }
}

}  // namespace histokit::img
