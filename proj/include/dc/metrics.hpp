#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "dc/depth_image.hpp"
#include "dc/error.hpp"

namespace dc::metrics {

// Accuracy-ratio thresholds for the delta metrics, tightest first.
inline constexpr std::array<double, 5> kDeltaThresholds = {1.02, 1.05, 1.10, 1.25, 1.5625};

struct MetricReport {
    std::size_t n_pixels = 0;
    double t = 1.0;  // saturation threshold (meters) for tmae / trmse

    double mae = 0.0;
    double rmse = 0.0;
    double tmae = 0.0;
    double trmse = 0.0;
    double mre = 0.0;
    double imae = 0.0;   // inverse depth error, 1/km
    double irmse = 0.0;  // inverse depth error, 1/km
    std::array<double, 5> delta = {0.0, 0.0, 0.0, 0.0, 0.0};

    // Fraction of scored pixels whose error meets or exceeds t, i.e. pixels
    // where the thresholded losses stop distinguishing error magnitude.
    double tmae_saturation_rate = 0.0;
};

// Scores pred against gt over the pixels present in both. Errors capped at t
// feed tmae/trmse so a few gross outliers cannot swamp the mean; the standard
// uncapped metrics, relative error, inverse-depth errors (1/km), and the
// delta accuracy fractions are reported alongside. Accumulation runs in
// row-major order so results are bit-reproducible.
inline MetricReport evaluate(const DepthImage& pred, const DepthImage& gt, double t = 1.0) {
    if (!pred.same_shape(gt)) fail(ErrorKind::invalid_input, "images must share dimensions");
    if (!std::isfinite(t) || t <= 0.0) fail(ErrorKind::invalid_input, "threshold t must be positive");

    MetricReport rep;
    rep.t = t;
    double s_abs = 0.0, s_sq = 0.0, s_tabs = 0.0, s_tsq = 0.0, s_rel = 0.0;
    double s_iabs = 0.0, s_isq = 0.0;
    std::array<std::size_t, 5> n_delta = {0, 0, 0, 0, 0};
    std::size_t n_sat = 0;

    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            if (!pred.present(r, c) || !gt.present(r, c)) continue;
            const double p = pred.at(r, c);
            const double g = gt.at(r, c);
            const double e = p - g;
            const double ae = std::abs(e);
            s_abs += ae;
            s_sq += e * e;
            s_tabs += std::min(ae, t);
            s_tsq += std::min(e * e, t * t);
            s_rel += ae / g;
            const double ie = 1000.0 / p - 1000.0 / g;
            s_iabs += std::abs(ie);
            s_isq += ie * ie;
            const double ratio = std::max(p / g, g / p);
            for (std::size_t i = 0; i < kDeltaThresholds.size(); ++i)
                if (ratio < kDeltaThresholds[i]) ++n_delta[i];
            if (ae >= t) ++n_sat;
            ++rep.n_pixels;
        }
    }
    if (rep.n_pixels == 0) fail(ErrorKind::empty_mask, "no pixels present in both images");

    const double n = static_cast<double>(rep.n_pixels);
    rep.mae = s_abs / n;
    rep.rmse = std::sqrt(s_sq / n);
    rep.tmae = s_tabs / n;
    rep.trmse = std::sqrt(s_tsq / n);
    rep.mre = s_rel / n;
    rep.imae = s_iabs / n;
    rep.irmse = std::sqrt(s_isq / n);
    for (std::size_t i = 0; i < kDeltaThresholds.size(); ++i)
        rep.delta[i] = static_cast<double>(n_delta[i]) / n;
    rep.tmae_saturation_rate = static_cast<double>(n_sat) / n;
    return rep;
}

inline std::string csv_header() {
    std::string h = "n_pixels,t,mae,rmse,tmae,trmse,mre,imae,irmse";
    for (double thr : kDeltaThresholds) {
        std::ostringstream os;
        os << ",delta_lt_" << thr;
        h += os.str();
    }
    h += ",tmae_saturation_rate";
    return h;
}

inline std::string csv_row(const MetricReport& rep) {
    std::ostringstream os;
    os << std::setprecision(12);
    os << rep.n_pixels << ',' << rep.t << ',' << rep.mae << ',' << rep.rmse << ',' << rep.tmae
       << ',' << rep.trmse << ',' << rep.mre << ',' << rep.imae << ',' << rep.irmse;
    for (double d : rep.delta) os << ',' << d;
    os << ',' << rep.tmae_saturation_rate;
    return os.str();
}

inline void write_csv(std::ostream& os, const MetricReport& rep) {
    os << csv_header() << '\n' << csv_row(rep) << '\n';
}

}  // namespace dc::metrics
