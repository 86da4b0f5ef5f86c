#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dc/error.hpp"

namespace dc {

// 2-D grid of optional metric depths (meters). Present depths are finite and
// positive; missing pixels are stored as NaN internally.
class DepthImage {
  public:
    DepthImage() = default;
    DepthImage(int height, int width)
        : height_(height), width_(width),
          data_(static_cast<std::size_t>(height) * width, std::numeric_limits<double>::quiet_NaN()) {
        if (height <= 0 || width <= 0)
            fail(ErrorKind::invalid_input, "depth image dimensions must be positive");
    }

    int height() const { return height_; }
    int width() const { return width_; }

    bool present(int r, int c) const { return !std::isnan(data_[index(r, c)]); }

    // Value of a present pixel; callers check present() first.
    double at(int r, int c) const { return data_[index(r, c)]; }

    std::optional<double> get(int r, int c) const {
        double v = data_[index(r, c)];
        if (std::isnan(v)) return std::nullopt;
        return v;
    }

    void set(int r, int c, double d) {
        if (!std::isfinite(d) || d <= 0.0)
            fail(ErrorKind::invalid_input, "depth must be finite and positive, got " + std::to_string(d) +
                                               " at pixel (" + std::to_string(r) + "," + std::to_string(c) + ")");
        data_[index(r, c)] = d;
    }

    void clear(int r, int c) { data_[index(r, c)] = std::numeric_limits<double>::quiet_NaN(); }

    std::size_t present_count() const {
        std::size_t n = 0;
        for (double v : data_)
            if (!std::isnan(v)) ++n;
        return n;
    }

    bool same_shape(const DepthImage& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

  private:
    std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * width_ + c; }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

// Drops the top `rows` rows (sensor data often has an empty sky band).
inline DepthImage crop_top(const DepthImage& img, int rows) {
    if (rows < 0 || rows >= img.height())
        fail(ErrorKind::invalid_input, "crop rows must be in [0, height)");
    DepthImage out(img.height() - rows, img.width());
    for (int r = rows; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            if (img.present(r, c)) out.set(r - rows, c, img.at(r, c));
    return out;
}

}  // namespace dc
