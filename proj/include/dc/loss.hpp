#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dc/bin_grid.hpp"
#include "dc/codec.hpp"
#include "dc/dc_image.hpp"
#include "dc/depth_image.hpp"
#include "dc/error.hpp"

namespace dc::loss {

// Floor applied inside log; keeps the loss finite when a predicted
// coefficient underflows to zero. Well below every test tolerance.
inline constexpr double kProbFloor = 1e-12;

struct LossReport {
    double total = 0.0;
    double per_pixel_mean = 0.0;
    std::size_t n_pixels = 0;
};

// Raw (pre-normalization) network outputs over the bin grid, stored like a
// coefficient image: pixel-major, n_bins values per pixel.
class LogitImage {
  public:
    LogitImage(int height, int width, BinGrid grid)
        : height_(height), width_(width), grid_(std::move(grid)),
          data_(static_cast<std::size_t>(height) * width * grid_.n_bins(), 0.0) {
        if (height <= 0 || width <= 0)
            fail(ErrorKind::invalid_input, "logit image dimensions must be positive");
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

// Max-subtracted softmax; invariant to adding a constant to all logits.
inline void softmax_into(std::span<const double> logits, std::span<double> out) {
    if (logits.empty() || logits.size() != out.size())
        fail(ErrorKind::invalid_input, "softmax requires matching non-empty spans");
    double hi = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) fail(ErrorKind::invalid_input, "softmax input must be finite");
        hi = std::max(hi, v);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - hi);
        sum += out[j];
    }
    for (std::size_t j = 0; j < out.size(); ++j) out[j] /= sum;
}

inline DCVector softmax_pixel(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    softmax_into(logits, out);
    return DCVector(std::move(out));
}

// -sum_j gt_j * log(pred_j), summed only over the (at most three) non-zero
// ground-truth entries.
inline double cross_entropy_pixel(std::span<const double> gt, std::span<const double> pred) {
    if (gt.size() != pred.size())
        fail(ErrorKind::invalid_input, "cross entropy requires matching coefficient counts");
    double ce = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < gt.size(); ++j) {
        if (gt[j] == 0.0) continue;
        any = true;
        ce -= gt[j] * std::log(std::max(pred[j], kProbFloor));
    }
    if (!any) fail(ErrorKind::missing_pixel, "cross entropy of a missing (all-zero) ground-truth pixel");
    return ce;
}

inline double cross_entropy_pixel(const DCVector& gt, const DCVector& pred) {
    return cross_entropy_pixel(gt.span(), pred.span());
}

// Gradient of cross_entropy_pixel(gt, softmax(logits)) with respect to the
// logits: softmax(logits) - gt.
inline void ce_gradient_logits_into(std::span<const double> gt, std::span<const double> logits,
                                    std::span<double> out) {
    if (gt.size() != logits.size() || gt.size() != out.size())
        fail(ErrorKind::invalid_input, "gradient requires matching spans");
    softmax_into(logits, out);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= gt[j];
}

inline std::vector<double> ce_gradient_logits(const DCVector& gt, std::span<const double> logits) {
    std::vector<double> out(logits.size());
    ce_gradient_logits_into(gt.span(), logits, out);
    return out;
}

// Cross entropy over an image, averaged over pixels with ground truth.
// Pixels without ground truth do not contribute.
inline LossReport cross_entropy_image(const DCImage& gt, const LogitImage& logits) {
    if (gt.height() != logits.height() || gt.width() != logits.width() ||
        gt.grid().n_bins() != logits.grid().n_bins())
        fail(ErrorKind::invalid_input, "ground truth and logits must share shape and grid");
    std::vector<double> prob(static_cast<std::size_t>(gt.grid().n_bins()));
    LossReport rep;
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            if (gt.pixel_missing(r, c)) continue;
            softmax_into(logits.pixel(r, c), prob);
            rep.total += cross_entropy_pixel(gt.pixel(r, c), prob);
            ++rep.n_pixels;
        }
    }
    if (rep.n_pixels == 0) fail(ErrorKind::empty_mask, "no ground-truth pixels to score");
    rep.per_pixel_mean = rep.total / static_cast<double>(rep.n_pixels);
    return rep;
}

inline DCImage softmax_image(const LogitImage& logits) {
    DCImage out(logits.height(), logits.width(), logits.grid());
    for (int r = 0; r < logits.height(); ++r)
        for (int c = 0; c < logits.width(); ++c) softmax_into(logits.pixel(r, c), out.pixel(r, c));
    return out;
}

namespace detail {

template <typename PerPixel>
inline LossReport masked_reduce(const DepthImage& pred, const DepthImage& gt, PerPixel f) {
    if (!pred.same_shape(gt)) fail(ErrorKind::invalid_input, "images must share dimensions");
    LossReport rep;
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            if (!pred.present(r, c) || !gt.present(r, c)) continue;
            rep.total += f(pred.at(r, c), gt.at(r, c));
            ++rep.n_pixels;
        }
    }
    if (rep.n_pixels == 0) fail(ErrorKind::empty_mask, "no pixels present in both images");
    rep.per_pixel_mean = rep.total / static_cast<double>(rep.n_pixels);
    return rep;
}

}  // namespace detail

inline LossReport mse_report(const DepthImage& pred, const DepthImage& gt) {
    return detail::masked_reduce(pred, gt, [](double p, double g) { return (p - g) * (p - g); });
}

inline LossReport mae_report(const DepthImage& pred, const DepthImage& gt) {
    return detail::masked_reduce(pred, gt, [](double p, double g) { return std::abs(p - g); });
}

inline double mse_loss(const DepthImage& pred, const DepthImage& gt) {
    return mse_report(pred, gt).per_pixel_mean;
}

inline double mae_loss(const DepthImage& pred, const DepthImage& gt) {
    return mae_report(pred, gt).per_pixel_mean;
}

enum class LandscapeLoss { mse, mae, tmse, tmae };

inline LandscapeLoss landscape_loss_from_string(const std::string& s) {
    if (s == "mse") return LandscapeLoss::mse;
    if (s == "mae") return LandscapeLoss::mae;
    if (s == "tmse") return LandscapeLoss::tmse;
    if (s == "tmae") return LandscapeLoss::tmae;
    fail(ErrorKind::invalid_input, "unknown landscape loss '" + s + "'");
}

// Mean penalty against two equally likely target depths:
//   L(d) = (rho(d - d1) + rho(d - d2)) / 2.
inline double two_point_loss_value(double d, double d1, double d2, LandscapeLoss loss, double t = 1.0) {
    auto rho = [&](double e) -> double {
        switch (loss) {
            case LandscapeLoss::mse: return e * e;
            case LandscapeLoss::mae: return std::abs(e);
            case LandscapeLoss::tmse: return std::min(e * e, t * t);
            case LandscapeLoss::tmae: return std::min(std::abs(e), t);
        }
        fail(ErrorKind::invalid_input, "unhandled landscape loss");
    };
    return 0.5 * (rho(d - d1) + rho(d - d2));
}

struct Landscape {
    std::vector<std::pair<double, double>> samples;  // (d, loss)
    double argmin_d = 0.0;
    double min_loss = 0.0;
};

// Samples L(d) on a uniform grid over [d1 - 1, d2 + 1] and reports the grid
// argmin. With MSE the minimum sits at the midpoint of the two depths; with
// MAE the whole interval between them is flat.
inline Landscape two_point_loss_landscape(double d1, double d2, LandscapeLoss loss, double t = 1.0,
                                          int samples = 401) {
    if (!(d1 < d2)) fail(ErrorKind::invalid_input, "landscape requires d1 < d2");
    if (samples < 3) fail(ErrorKind::invalid_input, "landscape requires at least 3 samples");
    if (t <= 0.0) fail(ErrorKind::invalid_input, "threshold t must be positive");
    const double lo = d1 - 1.0;
    const double hi = d2 + 1.0;
    const double step = (hi - lo) / (samples - 1);
    Landscape out;
    out.samples.reserve(samples);
    for (int i = 0; i < samples; ++i) {
        const double d = lo + i * step;
        const double v = two_point_loss_value(d, d1, d2, loss, t);
        out.samples.emplace_back(d, v);
        if (i == 0 || v < out.min_loss) {
            out.min_loss = v;
            out.argmin_d = d;
        }
    }
    return out;
}

}  // namespace dc::loss
