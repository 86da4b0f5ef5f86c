#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dc/bin_grid.hpp"
#include "dc/error.hpp"

namespace dc {

// Per-pixel depth coefficients: non-negative weights over the bin grid that
// sum to 1, or all zero for a missing pixel.
class DCVector {
  public:
    explicit DCVector(int n) : coeffs_(n, 0.0) {
        if (n <= 0) fail(ErrorKind::invalid_input, "coefficient vector needs at least one bin");
    }
    explicit DCVector(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
        if (coeffs_.empty()) fail(ErrorKind::invalid_input, "coefficient vector needs at least one bin");
    }

    int size() const { return static_cast<int>(coeffs_.size()); }
    double operator[](int j) const { return coeffs_[j]; }
    double& operator[](int j) { return coeffs_[j]; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    std::span<const double> span() const { return coeffs_; }

    bool is_missing() const {
        for (double v : coeffs_)
            if (v != 0.0) return false;
        return true;
    }

    double sum() const {
        double s = 0.0;
        for (double v : coeffs_) s += v;
        return s;
    }

  private:
    std::vector<double> coeffs_;
};

// H x W image of coefficient vectors sharing one bin grid. Stored flat in
// pixel-major order: pixel (r, c) owns n_bins consecutive values.
class DCImage {
  public:
    DCImage(int height, int width, BinGrid grid)
        : height_(height), width_(width), grid_(std::move(grid)),
          data_(static_cast<std::size_t>(height) * width * grid_.n_bins(), 0.0) {
        if (height <= 0 || width <= 0)
            fail(ErrorKind::invalid_input, "coefficient image dimensions must be positive");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    const BinGrid& grid() const { return grid_; }

    std::span<const double> pixel(int r, int c) const {
        return {data_.data() + offset(r, c), static_cast<std::size_t>(grid_.n_bins())};
    }
    std::span<double> pixel(int r, int c) {
        return {data_.data() + offset(r, c), static_cast<std::size_t>(grid_.n_bins())};
    }

    void set_pixel(int r, int c, const DCVector& v) {
        if (v.size() != grid_.n_bins())
            fail(ErrorKind::invalid_input, "coefficient vector length does not match the grid");
        auto dst = pixel(r, c);
        for (int j = 0; j < v.size(); ++j) dst[j] = v[j];
    }

    bool pixel_missing(int r, int c) const {
        for (double v : pixel(r, c))
            if (v != 0.0) return false;
        return true;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

  private:
    std::size_t offset(int r, int c) const {
        return (static_cast<std::size_t>(r) * width_ + c) * grid_.n_bins();
    }

    int height_;
    int width_;
    BinGrid grid_;
    std::vector<double> data_;
};

}  // namespace dc
