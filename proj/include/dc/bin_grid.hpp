#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dc/error.hpp"

namespace dc {

// Uniform depth axis: n_bins centers spaced b = (d_max - d_min) / n_bins
// apart, with centers[j] = d_min + (j + 0.5) * b so every bin lies inside
// [d_min, d_max]. Adjacent centers differ by exactly b.
class BinGrid {
  public:
    BinGrid(double d_min, double d_max, int n_bins) : d_min_(d_min), d_max_(d_max), n_(n_bins) {
        if (!std::isfinite(d_min) || !std::isfinite(d_max) || d_max <= d_min || d_min < 0.0)
            fail(ErrorKind::invalid_input, "bin grid requires finite 0 <= d_min < d_max");
        if (n_bins < 3)
            fail(ErrorKind::invalid_input, "bin grid requires at least 3 bins");
        b_ = (d_max - d_min) / n_bins;
        centers_.resize(n_bins);
        for (int j = 0; j < n_bins; ++j) centers_[j] = d_min + (j + 0.5) * b_;
    }

    double d_min() const { return d_min_; }
    double d_max() const { return d_max_; }
    int n_bins() const { return n_; }
    double bin_width() const { return b_; }
    double center(int j) const { return centers_[j]; }
    const std::vector<double>& centers() const { return centers_; }

    // Index of the center closest to d (ties resolve to the larger index).
    int nearest_bin(double d) const {
        int j = static_cast<int>(std::lround((d - d_min_) / b_ - 0.5));
        return std::clamp(j, 0, n_ - 1);
    }

    // Depths encodable as a full three-coefficient triple: the nearest
    // center must have neighbors on both sides.
    double encodable_min() const { return d_min_ + b_; }
    double encodable_max() const { return d_max_ - b_; }

    bool operator==(const BinGrid& other) const {
        return d_min_ == other.d_min_ && d_max_ == other.d_max_ && n_ == other.n_;
    }

  private:
    double d_min_;
    double d_max_;
    int n_;
    double b_;
    std::vector<double> centers_;
};

// Outdoor default: 1 m bins spanning 80 m at n_bins = 80.
inline BinGrid kitti_grid(int n_bins = 80) { return BinGrid(0.0, 80.0, n_bins); }

// Indoor default: same channel count over an 8 m range.
inline BinGrid nyu_grid(int n_bins = 80) { return BinGrid(0.0, 8.0, n_bins); }

}  // namespace dc
