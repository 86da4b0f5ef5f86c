#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dc/bin_grid.hpp"
#include "dc/codec.hpp"
#include "dc/depth_image.hpp"
#include "dc/error.hpp"
#include "dc/pointcloud.hpp"

namespace dc::analysis {

struct Conv1dResult {
    std::vector<std::optional<double>> sparse_path;
    std::vector<std::optional<double>> dc_path;
};

// One-dimensional smoothing demo on a sparse depth signal. The sparse path
// convolves depths directly, renormalizing the kernel over the samples
// actually present; across a depth step this lands between the two surfaces.
// The coefficient path convolves each depth bin's channel independently and
// decodes the strongest mode, so the output sticks to one surface. Windows
// with no samples at all yield missing outputs on both paths.
inline Conv1dResult demo_conv1d(const std::vector<std::optional<double>>& signal,
                                const std::vector<double>& kernel, const BinGrid& grid) {
    if (signal.empty()) fail(ErrorKind::invalid_input, "signal must be non-empty");
    if (kernel.empty() || kernel.size() % 2 == 0)
        fail(ErrorKind::invalid_input, "kernel length must be odd");
    double ksum = 0.0;
    for (double k : kernel) {
        if (!std::isfinite(k) || k < 0.0)
            fail(ErrorKind::invalid_input, "kernel weights must be non-negative");
        ksum += k;
    }
    if (ksum == 0.0) fail(ErrorKind::invalid_input, "kernel must have positive mass");

    const int n = static_cast<int>(signal.size());
    const int m = static_cast<int>(kernel.size()) / 2;
    const int bins = grid.n_bins();

    // encode the present samples once
    std::vector<std::vector<double>> coeffs(n);
    for (int i = 0; i < n; ++i) {
        if (!signal[i]) continue;
        const DCVector v = encode_pixel(*signal[i], grid);
        coeffs[i].assign(v.coeffs().begin(), v.coeffs().end());
    }

    Conv1dResult out;
    out.sparse_path.resize(n);
    out.dc_path.resize(n);
    std::vector<double> acc(bins);
    for (int i = 0; i < n; ++i) {
        double num = 0.0, den = 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        bool any = false;
        for (int j = -m; j <= m; ++j) {
            const int s = i + j;
            if (s < 0 || s >= n || !signal[s]) continue;
            const double w = kernel[j + m];
            num += w * *signal[s];
            den += w;
            if (w > 0.0) any = true;
            const std::vector<double>& c = coeffs[s];
            for (int b = 0; b < bins; ++b) acc[b] += w * c[b];
        }
        if (!any || den == 0.0) continue;  // no samples under the kernel
        out.sparse_path[i] = num / den;
        out.dc_path[i] = decode_3coeff(acc, grid);
    }
    return out;
}

// ---- bird's-eye view --------------------------------------------------------

struct BEVSpec {
    double x_min = -10.0;
    double x_max = 10.0;
    double z_min = 0.0;
    double z_max = 20.0;
    double cell = 0.25;
};

// Top-down occupancy counts: each present pixel back-projects to lateral
// offset x = (u - cx) * d / fx at range z = d and lands in one cell.
struct BEVGrid {
    BEVSpec spec;
    int nx = 0;
    int nz = 0;
    std::vector<std::uint64_t> counts;  // row-major, counts[iz * nx + ix]
    std::size_t out_of_range = 0;

    std::uint64_t at(int iz, int ix) const { return counts[static_cast<std::size_t>(iz) * nx + ix]; }
    std::uint64_t total_in_range() const {
        std::uint64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
};

inline BEVGrid bev_project(const DepthImage& depth, const io::Camera& cam, const BEVSpec& spec) {
    io::validate(cam);
    if (cam.width != depth.width() || cam.height != depth.height())
        fail(ErrorKind::invalid_input, "camera size does not match the depth map");
    if (!std::isfinite(spec.cell) || spec.cell <= 0.0)
        fail(ErrorKind::invalid_input, "bev cell size must be positive");
    if (!(spec.x_min < spec.x_max) || !(spec.z_min < spec.z_max))
        fail(ErrorKind::invalid_input, "bev ranges must be non-empty");

    BEVGrid grid;
    grid.spec = spec;
    grid.nx = static_cast<int>(std::ceil((spec.x_max - spec.x_min) / spec.cell));
    grid.nz = static_cast<int>(std::ceil((spec.z_max - spec.z_min) / spec.cell));
    grid.counts.assign(static_cast<std::size_t>(grid.nx) * grid.nz, 0);

    for (int r = 0; r < depth.height(); ++r)
        for (int c = 0; c < depth.width(); ++c) {
            if (!depth.present(r, c)) continue;
            const double d = depth.at(r, c);
            const double x = (c - cam.cx) * d / cam.fx;
            const int ix = static_cast<int>(std::floor((x - spec.x_min) / spec.cell));
            const int iz = static_cast<int>(std::floor((d - spec.z_min) / spec.cell));
            if (ix < 0 || ix >= grid.nx || iz < 0 || iz >= grid.nz) {
                ++grid.out_of_range;
                continue;
            }
            ++grid.counts[static_cast<std::size_t>(iz) * grid.nx + ix];
        }
    return grid;
}

// ---- mixed pixels -----------------------------------------------------------

struct MixedPixelStats {
    std::size_t mixed = 0;
    std::size_t total = 0;

    double rate() const { return total == 0 ? 0.0 : static_cast<double>(mixed) / total; }
};

// A predicted pixel is "mixed" when it is farther than t from every ground
// truth depth in its (2r+1)^2 neighborhood — it belongs to no nearby surface.
inline MixedPixelStats mixed_pixel_stats(const DepthImage& pred, const DepthImage& gt, double t,
                                         int radius = 2) {
    if (!pred.same_shape(gt)) fail(ErrorKind::invalid_input, "images must share dimensions");
    if (!std::isfinite(t) || t <= 0.0) fail(ErrorKind::invalid_input, "threshold t must be positive");
    if (radius < 0) fail(ErrorKind::invalid_input, "window radius must be non-negative");

    MixedPixelStats stats;
    for (int r = 0; r < gt.height(); ++r)
        for (int c = 0; c < gt.width(); ++c) {
            if (!pred.present(r, c) || !gt.present(r, c)) continue;
            ++stats.total;
            const double p = pred.at(r, c);
            bool near_surface = false;
            for (int dr = -radius; dr <= radius && !near_surface; ++dr)
                for (int dc2 = -radius; dc2 <= radius && !near_surface; ++dc2) {
                    const int rr = r + dr, cc = c + dc2;
                    if (rr < 0 || rr >= gt.height() || cc < 0 || cc >= gt.width()) continue;
                    if (!gt.present(rr, cc)) continue;
                    if (std::abs(p - gt.at(rr, cc)) <= t) near_surface = true;
                }
            if (!near_surface) ++stats.mixed;
        }
    return stats;
}

inline double mixed_pixel_rate(const DepthImage& pred, const DepthImage& gt, double t, int radius = 2) {
    const MixedPixelStats stats = mixed_pixel_stats(pred, gt, t, radius);
    if (stats.total == 0) fail(ErrorKind::empty_mask, "no pixels present in both images");
    return stats.rate();
}

}  // namespace dc::analysis
