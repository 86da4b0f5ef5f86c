#pragma once

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "dc/depth_image.hpp"
#include "dc/error.hpp"

namespace dc::io {

// 16-bit grayscale PNG depth maps: stored value = depth * 256 (i.e. 1/256 m
// resolution), 0 = missing. Depths must survive the quantization: anything
// that would round to 0 or overflow 16 bits is rejected rather than silently
// corrupted.
inline constexpr double kPngDepthScale = 256.0;

namespace detail {

struct PngWriteGuard {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteGuard() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngReadGuard {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadGuard() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

}  // namespace detail

inline void save_depth_png(const std::filesystem::path& path, const DepthImage& img) {
    const int h = img.height();
    const int w = img.width();
    std::vector<std::uint16_t> stored(static_cast<std::size_t>(h) * w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!img.present(r, c)) continue;
            const double v = img.at(r, c) * kPngDepthScale;
            const long long q = std::llround(v);
            if (q < 1 || q > 65535)
                fail(ErrorKind::out_of_range,
                     "depth " + std::to_string(img.at(r, c)) + " at pixel (" + std::to_string(r) +
                         ", " + std::to_string(c) + ") does not fit the 16-bit encoding");
            stored[static_cast<std::size_t>(r) * w + c] = static_cast<std::uint16_t>(q);
        }

    const std::filesystem::path tmp = path.string() + ".tmp";
    detail::PngWriteGuard g;
    g.fp = std::fopen(tmp.string().c_str(), "wb");
    if (!g.fp) fail(ErrorKind::io, "cannot open '" + tmp.string() + "' for writing");
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (g.png) g.info = png_create_info_struct(g.png);
    if (!g.png || !g.info) fail(ErrorKind::io, "cannot allocate png writer");

    std::vector<png_byte> row(static_cast<std::size_t>(w) * 2);
    if (setjmp(png_jmpbuf(g.png))) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::io, "png write to '" + path.string() + "' failed");
    }
    png_init_io(g.png, g.fp);
    png_set_IHDR(g.png, g.info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {  // network byte order per the png format
            const std::uint16_t v = stored[static_cast<std::size_t>(r) * w + c];
            row[2 * c] = static_cast<png_byte>(v >> 8);
            row[2 * c + 1] = static_cast<png_byte>(v & 0xff);
        }
        png_write_row(g.png, row.data());
    }
    png_write_end(g.png, nullptr);

    if (std::fclose(g.fp) != 0) {
        g.fp = nullptr;
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::io, "short write to '" + tmp.string() + "'");
    }
    g.fp = nullptr;
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::io, "cannot rename temp file onto '" + path.string() + "'");
    }
}

inline DepthImage load_depth_png(const std::filesystem::path& path) {
    detail::PngReadGuard g;
    g.fp = std::fopen(path.string().c_str(), "rb");
    if (!g.fp) fail(ErrorKind::io, "cannot open '" + path.string() + "'");

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, g.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        fail(ErrorKind::format, "'" + path.string() + "' is not a png file");

    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (g.png) g.info = png_create_info_struct(g.png);
    if (!g.png || !g.info) fail(ErrorKind::io, "cannot allocate png reader");

    if (setjmp(png_jmpbuf(g.png))) fail(ErrorKind::format, "'" + path.string() + "' is corrupt");
    png_init_io(g.png, g.fp);
    png_set_sig_bytes(g.png, 8);
    png_read_info(g.png, g.info);

    const png_uint_32 w = png_get_image_width(g.png, g.info);
    const png_uint_32 h = png_get_image_height(g.png, g.info);
    const int bit_depth = png_get_bit_depth(g.png, g.info);
    const int color_type = png_get_color_type(g.png, g.info);
    if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16)
        fail(ErrorKind::format, "'" + path.string() + "' is not a 16-bit grayscale depth map");
    if (w == 0 || h == 0) fail(ErrorKind::format, "'" + path.string() + "' has empty dimensions");

    DepthImage img(static_cast<int>(h), static_cast<int>(w));
    std::vector<png_byte> row(static_cast<std::size_t>(w) * 2);
    for (png_uint_32 r = 0; r < h; ++r) {
        png_read_row(g.png, row.data(), nullptr);
        for (png_uint_32 c = 0; c < w; ++c) {
            const std::uint16_t v =
                static_cast<std::uint16_t>((row[2 * c] << 8) | row[2 * c + 1]);
            if (v != 0) img.set(static_cast<int>(r), static_cast<int>(c), v / kPngDepthScale);
        }
    }
    return img;
}

}  // namespace dc::io
