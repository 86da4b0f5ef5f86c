#pragma once

#include <cstddef>
#include <vector>

#include "dc/error.hpp"

namespace dc {

// Dense (channels, height, width) block of doubles, row-major within each
// channel. The toy network's activations and parameters live in these.
class Tensor3 {
  public:
    Tensor3() = default;
    Tensor3(int channels, int height, int width, double fill = 0.0)
        : c_(channels), h_(height), w_(width),
          data_(static_cast<std::size_t>(channels) * height * width, fill) {
        if (channels <= 0 || height <= 0 || width <= 0)
            fail(ErrorKind::invalid_input, "tensor dimensions must be positive");
    }

    int channels() const { return c_; }
    int height() const { return h_; }
    int width() const { return w_; }
    std::size_t size() const { return data_.size(); }

    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }

    const double* channel(int c) const { return data_.data() + static_cast<std::size_t>(c) * h_ * w_; }
    double* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * h_ * w_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Tensor3& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

  private:
    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * h_ + y) * w_ + x;
    }

    int c_ = 0;
    int h_ = 0;
    int w_ = 0;
    std::vector<double> data_;
};

}  // namespace dc
