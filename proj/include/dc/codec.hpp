#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>

#include "dc/bin_grid.hpp"
#include "dc/dc_image.hpp"
#include "dc/depth_image.hpp"
#include "dc/error.hpp"

namespace dc {

// A metric depth rendered as three consecutive coefficients
//   ((0.5 - delta) / 2,  0.5,  (0.5 + delta) / 2)
// at bins (k-1, k, k+1), where k is the bin closest to the depth and
// delta = (d - D_k) / b in [-0.5, 0.5]. The coefficients are non-negative,
// sum to 1, and their inner product with the bin centers reproduces the
// depth exactly.
struct EncodedTriple {
    int k;                    // center bin, 1 <= k <= n_bins - 2
    std::array<double, 3> c;  // weights at k-1, k, k+1
};

namespace detail {
inline constexpr double kDeltaSlack = 1e-12;  // absorbs rounding at bin edges
}

inline EncodedTriple encode_triple(double d, const BinGrid& grid, bool clamp = false) {
    if (!std::isfinite(d) || d <= 0.0)
        fail(ErrorKind::invalid_input, "depth must be finite and positive, got " + std::to_string(d));
    const double lo = grid.encodable_min();
    const double hi = grid.encodable_max();
    if (clamp) d = std::clamp(d, lo, hi);
    int k = std::clamp(grid.nearest_bin(d), 1, grid.n_bins() - 2);
    double delta = (d - grid.center(k)) / grid.bin_width();
    if (delta < -0.5 - detail::kDeltaSlack || delta > 0.5 + detail::kDeltaSlack)
        fail(ErrorKind::out_of_range, "depth " + std::to_string(d) + " outside encodable span [" +
                                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    delta = std::clamp(delta, -0.5, 0.5);
    return {k, {(0.5 - delta) / 2.0, 0.5, (0.5 + delta) / 2.0}};
}

inline DCVector encode_pixel(double d, const BinGrid& grid, bool clamp = false) {
    const EncodedTriple t = encode_triple(d, grid, clamp);
    DCVector out(grid.n_bins());
    out[t.k - 1] = t.c[0];
    out[t.k] = t.c[1];
    out[t.k + 1] = t.c[2];
    return out;
}

// Missing pixels map to the all-zero vector; per-pixel failures are rethrown
// with the pixel coordinates attached.
inline DCImage encode_image(const DepthImage& depth, const BinGrid& grid, bool clamp = false) {
    DCImage out(depth.height(), depth.width(), grid);
    for (int r = 0; r < depth.height(); ++r) {
        for (int c = 0; c < depth.width(); ++c) {
            if (!depth.present(r, c)) continue;
            try {
                const EncodedTriple t = encode_triple(depth.at(r, c), grid, clamp);
                auto px = out.pixel(r, c);
                px[t.k - 1] = t.c[0];
                px[t.k] = t.c[1];
                px[t.k + 1] = t.c[2];
            } catch (const Error& e) {
                fail(e.kind(), "pixel (" + std::to_string(r) + "," + std::to_string(c) + "): " + e.what());
            }
        }
    }
    return out;
}

namespace detail {

inline void check_coefficients(std::span<const double> c, const BinGrid& grid) {
    if (static_cast<int>(c.size()) != grid.n_bins())
        fail(ErrorKind::invalid_input, "coefficient count does not match the grid");
    for (double v : c)
        if (!(v >= 0.0)) fail(ErrorKind::invalid_input, "coefficients must be non-negative and finite");
}

}  // namespace detail

// Inner product with the bin centers. Coefficients are renormalized when
// their sum is within 1e-6 of 1; a larger discrepancy is an error.
inline double decode_all(std::span<const double> c, const BinGrid& grid) {
    detail::check_coefficients(c, grid);
    double sum = 0.0, dot = 0.0;
    for (int j = 0; j < grid.n_bins(); ++j) {
        sum += c[j];
        dot += c[j] * grid.center(j);
    }
    if (sum == 0.0) fail(ErrorKind::missing_pixel, "cannot decode an all-zero coefficient vector");
    if (std::abs(sum - 1.0) > 1e-6)
        fail(ErrorKind::normalization, "coefficient sum " + std::to_string(sum) + " too far from 1");
    return dot / sum;
}

// Depth of the strongest density peak: the maximum coefficient (ties resolve
// to the lowest index) averaged with its in-grid neighbors. Invariant under
// uniform positive scaling of the coefficients.
inline double decode_3coeff(std::span<const double> c, const BinGrid& grid) {
    detail::check_coefficients(c, grid);
    int k = 0;
    double best = c[0];
    for (int j = 1; j < grid.n_bins(); ++j) {
        if (c[j] > best) {
            best = c[j];
            k = j;
        }
    }
    if (best == 0.0) fail(ErrorKind::missing_pixel, "cannot decode an all-zero coefficient vector");
    double num = 0.0, den = 0.0;
    for (int j = std::max(0, k - 1); j <= std::min(grid.n_bins() - 1, k + 1); ++j) {
        num += c[j] * grid.center(j);
        den += c[j];
    }
    return num / den;
}

inline double decode_all(const DCVector& c, const BinGrid& grid) { return decode_all(c.span(), grid); }
inline double decode_3coeff(const DCVector& c, const BinGrid& grid) { return decode_3coeff(c.span(), grid); }

enum class DecodeMode { all, three_coeff };

inline DepthImage decode_image(const DCImage& dc, DecodeMode mode) {
    DepthImage out(dc.height(), dc.width());
    for (int r = 0; r < dc.height(); ++r) {
        for (int c = 0; c < dc.width(); ++c) {
            if (dc.pixel_missing(r, c)) continue;
            try {
                const double d = mode == DecodeMode::all ? decode_all(dc.pixel(r, c), dc.grid())
                                                         : decode_3coeff(dc.pixel(r, c), dc.grid());
                out.set(r, c, d);
            } catch (const Error& e) {
                fail(e.kind(), "pixel (" + std::to_string(r) + "," + std::to_string(c) + "): " + e.what());
            }
        }
    }
    return out;
}

}  // namespace dc
