#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>

#include "dc/error.hpp"
#include "dc/tensor_io.hpp"

namespace dc::io {

// 8-bit binary PGM for quick visual inspection of guide images and BEV
// occupancy maps. Values are clamped to [0, 1] and scaled to 0..255.
inline void save_pgm(const std::filesystem::path& path, int height, int width,
                     std::span<const double> values) {
    if (height <= 0 || width <= 0) fail(ErrorKind::invalid_input, "pgm dimensions must be positive");
    if (values.size() != static_cast<std::size_t>(height) * width)
        fail(ErrorKind::invalid_input, "pgm value count does not match its dimensions");
    std::string buf = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    buf.reserve(buf.size() + values.size());
    for (double v : values) {
        if (std::isnan(v)) v = 0.0;
        const double clamped = std::clamp(v, 0.0, 1.0);
        buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
    }
    detail::atomic_write(path, buf);
}

}  // namespace dc::io
