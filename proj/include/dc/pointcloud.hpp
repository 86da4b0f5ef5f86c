#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dc/depth_image.hpp"
#include "dc/error.hpp"
#include "dc/tensor_io.hpp"

namespace dc::io {

// Pinhole camera. Frame convention: x right, y down, z forward (optical axis).
struct Camera {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
};

inline void validate(const Camera& cam) {
    if (!std::isfinite(cam.fx) || !std::isfinite(cam.fy) || cam.fx <= 0.0 || cam.fy <= 0.0)
        fail(ErrorKind::invalid_input, "camera focal lengths must be positive");
    if (cam.width <= 0 || cam.height <= 0)
        fail(ErrorKind::invalid_input, "camera image size must be positive");
    if (!std::isfinite(cam.cx) || !std::isfinite(cam.cy) || cam.cx < 0.0 || cam.cx >= cam.width ||
        cam.cy < 0.0 || cam.cy >= cam.height)
        fail(ErrorKind::invalid_input, "camera principal point must lie inside the image");
}

struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::optional<int> ring;  // scanner row index, when known
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view tok, std::size_t line_no, const std::string& name) {
    const std::string_view t = trim(tok);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v))
        fail(ErrorKind::format, name + ":" + std::to_string(line_no) + ": bad number '" +
                                    std::string(tok) + "'");
    return v;
}

inline int parse_ring(std::string_view tok, std::size_t line_no, const std::string& name) {
    const std::string_view t = trim(tok);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || v < 0)
        fail(ErrorKind::format, name + ":" + std::to_string(line_no) + ": bad ring index '" +
                                    std::string(tok) + "'");
    return v;
}

}  // namespace detail

// Plain-text point list: one "x,y,z" or "x,y,z,ring" per line. Blank lines
// and lines starting with '#' are skipped; the column count must be
// consistent across the file.
inline std::vector<Point> load_points_csv(const std::filesystem::path& path) {
    const std::vector<unsigned char> raw = detail::read_all(path);
    const std::string_view text(reinterpret_cast<const char*>(raw.data()), raw.size());
    const std::string name = path.string();

    std::vector<Point> points;
    int columns = 0;  // 0 until the first data line fixes it
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = detail::trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string_view> toks;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            toks.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (toks.size() != 3 && toks.size() != 4)
            fail(ErrorKind::format,
                 name + ":" + std::to_string(line_no) + ": expected 3 or 4 columns");
        if (columns == 0) columns = static_cast<int>(toks.size());
        if (static_cast<int>(toks.size()) != columns)
            fail(ErrorKind::format,
                 name + ":" + std::to_string(line_no) + ": inconsistent column count");

        Point p;
        p.x = detail::parse_double(toks[0], line_no, name);
        p.y = detail::parse_double(toks[1], line_no, name);
        p.z = detail::parse_double(toks[2], line_no, name);
        if (toks.size() == 4) p.ring = detail::parse_ring(toks[3], line_no, name);
        points.push_back(p);
    }
    return points;
}

inline void save_points_csv(const std::filesystem::path& path, const std::vector<Point>& points) {
    std::string buf;
    char num[64];
    auto append_num = [&](double v) {
        const auto [ptr, ec] = std::to_chars(num, num + sizeof num, v);
        (void)ec;
        buf.append(num, ptr);
    };
    for (const Point& p : points) {
        append_num(p.x);
        buf.push_back(',');
        append_num(p.y);
        buf.push_back(',');
        append_num(p.z);
        if (p.ring) {
            buf.push_back(',');
            buf.append(std::to_string(*p.ring));
        }
        buf.push_back('\n');
    }
    detail::atomic_write(path, buf);
}

// Assigns ring indices by elevation angle asin(z / ‖p‖) — sensor frame with
// z up — binned uniformly between the lowest and highest elevation present.
inline void estimate_rings_from_elevation(std::vector<Point>& points, int n_rings) {
    if (n_rings < 2) fail(ErrorKind::invalid_input, "ring count must be at least 2");
    if (points.empty()) fail(ErrorKind::degenerate_input, "no points to assign rings to");
    std::vector<double> elev(points.size());
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point& p = points[i];
        const double norm = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
        if (norm == 0.0)
            fail(ErrorKind::degenerate_input, "point " + std::to_string(i) + " is at the origin");
        elev[i] = std::asin(p.z / norm);
        if (i == 0) {
            lo = hi = elev[i];
        } else {
            lo = std::min(lo, elev[i]);
            hi = std::max(hi, elev[i]);
        }
    }
    if (!(hi > lo))
        fail(ErrorKind::degenerate_input, "all points share one elevation; cannot form rings");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int r = static_cast<int>((elev[i] - lo) / (hi - lo) * n_rings);
        points[i].ring = std::clamp(r, 0, n_rings - 1);
    }
}

// Keeps points whose ring index is 0, k, 2k, ... — the usual way to fake a
// sparser scanner from a denser one.
inline std::vector<Point> subsample_rings(const std::vector<Point>& points, int every_k) {
    if (every_k < 1) fail(ErrorKind::invalid_pattern, "ring stride must be at least 1");
    std::vector<Point> out;
    for (const Point& p : points) {
        if (!p.ring)
            fail(ErrorKind::invalid_input, "points lack ring indices; assign or estimate them first");
        if (*p.ring % every_k == 0) out.push_back(p);
    }
    return out;
}

inline std::vector<Point> subsample_rings(const std::vector<Point>& points,
                                          const std::set<int>& keep) {
    std::vector<Point> out;
    for (const Point& p : points) {
        if (!p.ring)
            fail(ErrorKind::invalid_input, "points lack ring indices; assign or estimate them first");
        if (keep.count(*p.ring)) out.push_back(p);
    }
    return out;
}

struct ProjectionResult {
    DepthImage image;
    std::size_t dropped_behind = 0;        // z <= 0, behind the camera
    std::size_t dropped_out_of_frame = 0;  // projected outside the image
    std::size_t collisions = 0;            // landed on an occupied pixel
};

// Projects points through the pinhole model. When several points land on one
// pixel the nearest wins, matching what a depth sensor would see.
inline ProjectionResult project_to_image(const std::vector<Point>& points, const Camera& cam) {
    validate(cam);
    ProjectionResult res{DepthImage(cam.height, cam.width), 0, 0, 0};
    for (const Point& p : points) {
        if (!(p.z > 0.0)) {
            ++res.dropped_behind;
            continue;
        }
        const double u = cam.fx * p.x / p.z + cam.cx;
        const double v = cam.fy * p.y / p.z + cam.cy;
        const long long c = std::llround(u);
        const long long r = std::llround(v);
        if (c < 0 || c >= cam.width || r < 0 || r >= cam.height) {
            ++res.dropped_out_of_frame;
            continue;
        }
        const int ri = static_cast<int>(r), ci = static_cast<int>(c);
        if (res.image.present(ri, ci)) {
            ++res.collisions;
            if (p.z < res.image.at(ri, ci)) res.image.set(ri, ci, p.z);
        } else {
            res.image.set(ri, ci, p.z);
        }
    }
    return res;
}

// Lifts every present pixel back to a 3-d point on its viewing ray.
inline std::vector<Point> backproject(const DepthImage& img, const Camera& cam) {
    validate(cam);
    if (cam.width != img.width() || cam.height != img.height())
        fail(ErrorKind::invalid_input, "camera size does not match the depth map");
    std::vector<Point> out;
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            if (!img.present(r, c)) continue;
            const double z = img.at(r, c);
            out.push_back(Point{(c - cam.cx) * z / cam.fx, (r - cam.cy) * z / cam.fy, z, {}});
        }
    return out;
}

}  // namespace dc::io
