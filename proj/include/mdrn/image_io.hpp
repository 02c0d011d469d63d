#pragma once

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "mdrn/errors.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Decode an 8-bit PNG into (1, C, H, W) doubles in [0,1], C = 1 or 3.
/// Palette and low-depth images are expanded; 16-bit is reduced; alpha is
/// dropped.
inline Tensor<double> read_png(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open image: " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw DataError("not a PNG file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png decoder init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png decoder init failed");
    }
    std::vector<png_byte> data;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte ctype = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (ctype == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (ctype == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (ctype & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported channel count " + std::to_string(channels) + " in " + path);
    }
    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    data.resize(stride * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<double> img(1, channels, h, w);
    for (std::int64_t c = 0; c < channels; ++c)
        for (png_uint_32 y = 0; y < h; ++y)
            for (png_uint_32 x = 0; x < w; ++x) {
                img.at(0, c, y, x) = data[y * stride + x * channels + static_cast<std::size_t>(c)] / 255.0;
            }
    return img;
}

/// Encode (1, 1|3, H, W) in [0,1] as an 8-bit PNG. Values are clipped then
/// rounded half-up, the only place the pipeline quantizes.
inline void write_png(const std::string& path, const Tensor<double>& img) {
    const Shape s = img.shape();
    if (s.b != 1 || (s.c != 1 && s.c != 3)) {
        throw std::invalid_argument("write_png: need (1, 1|3, H, W), got " + s.str());
    }
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot write image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png encoder init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png encoder init failed");
    }
    std::vector<png_byte> data(static_cast<std::size_t>(s.c * s.h * s.w));
    std::vector<png_bytep> rows(static_cast<std::size_t>(s.h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png encode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), 8,
                 s.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    const std::size_t stride = static_cast<std::size_t>(s.w * s.c);
    for (std::int64_t y = 0; y < s.h; ++y) {
        for (std::int64_t x = 0; x < s.w; ++x)
            for (std::int64_t c = 0; c < s.c; ++c) {
                double v = img.at(0, c, y, x);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                data[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x * s.c + c)] =
                    static_cast<png_byte>(std::floor(v * 255.0 + 0.5));
            }
        rows[static_cast<std::size_t>(y)] = data.data() + static_cast<std::size_t>(y) * stride;
    }
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// ITU-R BT.601 luma. Grayscale input passes through unchanged.
inline Tensor<double> to_grayscale(const Tensor<double>& img) {
    const Shape s = img.shape();
    if (s.c == 1) return img;
    if (s.c != 3) throw std::invalid_argument("to_grayscale: need 1 or 3 channels, got " + s.str());
    Tensor<double> out(s.b, 1, s.h, s.w);
    for (std::int64_t b = 0; b < s.b; ++b)
        for (std::int64_t y = 0; y < s.h; ++y)
            for (std::int64_t x = 0; x < s.w; ++x) {
                out.at(b, 0, y, x) =
                    0.299 * img.at(b, 0, y, x) + 0.587 * img.at(b, 1, y, x) + 0.114 * img.at(b, 2, y, x);
            }
    return out;
}

}  // namespace mdrn
