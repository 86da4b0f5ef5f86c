#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dc/depth_image.hpp"
#include "dc/error.hpp"
#include "dc/tensor.hpp"
#include "dc/tensor_io.hpp"

namespace dc::scene {

// depth(r, c) = base + slope_x * c + slope_y * r
struct PlanarField {
    double base = 0.0;
    double slope_x = 0.0;
    double slope_y = 0.0;

    double at(int r, int c) const { return base + slope_x * c + slope_y * r; }
    bool operator==(const PlanarField&) const = default;
};

struct RectObject {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
    PlanarField depth;

    bool contains(int r, int c) const {
        return r >= top && r < top + height && c >= left && c < left + width;
    }
    bool operator==(const RectObject&) const = default;
};

// A synthetic scene: a planar background with planar rectangles floating in
// front of it, plus optional Gaussian surface noise. Every depth the scene
// can produce must stay inside [range_min, range_max] so the result is
// encodable on a bin grid covering that range.
struct SceneSpec {
    int height = 32;
    int width = 32;
    double range_min = 0.5;
    double range_max = 9.5;
    PlanarField background{6.0, 0.0, 0.0};
    std::vector<RectObject> objects;
    double noise_sigma = 0.0;
    std::uint32_t seed = 0;
    int guide_blur = 0;

    bool operator==(const SceneSpec&) const = default;
};

namespace detail {

// Planar fields attain their extrema over a rectangle at its corners.
inline void field_range(const PlanarField& f, int top, int left, int height, int width,
                        double& lo, double& hi) {
    const double c0 = f.at(top, left);
    const double c1 = f.at(top, left + width - 1);
    const double c2 = f.at(top + height - 1, left);
    const double c3 = f.at(top + height - 1, left + width - 1);
    lo = std::min(std::min(c0, c1), std::min(c2, c3));
    hi = std::max(std::max(c0, c1), std::max(c2, c3));
}

}  // namespace detail

inline void validate(const SceneSpec& spec) {
    if (spec.height <= 0 || spec.width <= 0)
        fail(ErrorKind::invalid_spec, "scene dimensions must be positive");
    if (!std::isfinite(spec.range_min) || !std::isfinite(spec.range_max) || spec.range_min <= 0.0 ||
        spec.range_min >= spec.range_max)
        fail(ErrorKind::invalid_spec, "scene depth range must satisfy 0 < range_min < range_max");
    if (!std::isfinite(spec.noise_sigma) || spec.noise_sigma < 0.0)
        fail(ErrorKind::invalid_spec, "noise sigma must be non-negative");
    if (spec.guide_blur < 0) fail(ErrorKind::invalid_spec, "guide blur radius must be non-negative");

    double bg_lo, bg_hi;
    detail::field_range(spec.background, 0, 0, spec.height, spec.width, bg_lo, bg_hi);
    if (bg_lo < spec.range_min || bg_hi > spec.range_max)
        fail(ErrorKind::invalid_spec, "background depth leaves the scene range");

    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const RectObject& o = spec.objects[i];
        if (o.height < 1 || o.width < 1 || o.top < 0 || o.left < 0 ||
            o.top + o.height > spec.height || o.left + o.width > spec.width)
            fail(ErrorKind::invalid_spec, "object " + std::to_string(i) + " leaves the image frame");
        double lo, hi;
        detail::field_range(o.depth, o.top, o.left, o.height, o.width, lo, hi);
        if (lo < spec.range_min || hi > spec.range_max)
            fail(ErrorKind::invalid_spec, "object " + std::to_string(i) + " depth leaves the scene range");
        // the object must sit strictly in front of the background everywhere
        // it appears; compare at the footprint corners (both fields planar)
        for (int r : {o.top, o.top + o.height - 1})
            for (int c : {o.left, o.left + o.width - 1})
                if (!(o.depth.at(r, c) < spec.background.at(r, c)))
                    fail(ErrorKind::invalid_spec,
                         "object " + std::to_string(i) + " is not in front of the background");
    }
}

// Dense ground truth. The nearest surface wins at every pixel, so rendering
// is independent of object order. Surface noise is seeded and clipped to the
// scene range.
inline DepthImage render(const SceneSpec& spec) {
    validate(spec);
    DepthImage img(spec.height, spec.width);
    std::mt19937 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c) {
            double d = spec.background.at(r, c);
            for (const RectObject& o : spec.objects)
                if (o.contains(r, c)) d = std::min(d, o.depth.at(r, c));
            if (spec.noise_sigma > 0.0)
                d = std::clamp(d + spec.noise_sigma * noise(rng), spec.range_min, spec.range_max);
            img.set(r, c, d);
        }
    return img;
}

inline DepthImage render_noiseless(const SceneSpec& spec) {
    SceneSpec s = spec;
    s.noise_sigma = 0.0;
    return render(s);
}

// Grayscale stand-in for an rgb guide: each object gets its own intensity,
// the background stays at 0, and an optional box blur softens the edges the
// way a real camera would.
inline Tensor3 render_guide(const SceneSpec& spec) {
    validate(spec);
    Tensor3 guide(1, spec.height, spec.width, 0.0);
    const double n = static_cast<double>(spec.objects.size());
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c) {
            double best_depth = spec.background.at(r, c);
            double intensity = 0.0;
            for (std::size_t i = 0; i < spec.objects.size(); ++i) {
                const RectObject& o = spec.objects[i];
                if (o.contains(r, c) && o.depth.at(r, c) < best_depth) {
                    best_depth = o.depth.at(r, c);
                    intensity = (static_cast<double>(i) + 1.0) / n;
                }
            }
            guide.at(0, r, c) = intensity;
        }
    if (spec.guide_blur > 0) {
        const int b = spec.guide_blur;
        Tensor3 blurred(1, spec.height, spec.width, 0.0);
        for (int r = 0; r < spec.height; ++r)
            for (int c = 0; c < spec.width; ++c) {
                double sum = 0.0;
                int count = 0;
                for (int dr = -b; dr <= b; ++dr)
                    for (int dcol = -b; dcol <= b; ++dcol) {
                        const int rr = r + dr, cc = c + dcol;
                        if (rr < 0 || rr >= spec.height || cc < 0 || cc >= spec.width) continue;
                        sum += guide.at(0, rr, cc);
                        ++count;
                    }
                blurred.at(0, r, c) = sum / count;
            }
        guide = std::move(blurred);
    }
    return guide;
}

// Pixels whose 4-neighborhood spans a depth gap larger than t: the places
// where area-based processing mixes foreground and background.
inline std::vector<std::uint8_t> discontinuity_mask(const DepthImage& gt, double t) {
    if (!std::isfinite(t) || t <= 0.0) fail(ErrorKind::invalid_input, "threshold t must be positive");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(gt.height()) * gt.width(), 0);
    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dcol[4] = {0, 0, -1, 1};
    for (int r = 0; r < gt.height(); ++r)
        for (int c = 0; c < gt.width(); ++c) {
            if (!gt.present(r, c)) continue;
            for (int k = 0; k < 4; ++k) {
                const int rr = r + dr[k], cc = c + dcol[k];
                if (rr < 0 || rr >= gt.height() || cc < 0 || cc >= gt.width()) continue;
                if (!gt.present(rr, cc)) continue;
                if (std::abs(gt.at(r, c) - gt.at(rr, cc)) > t) {
                    mask[static_cast<std::size_t>(r) * gt.width() + c] = 1;
                    break;
                }
            }
        }
    return mask;
}

enum class PatternKind { uniform_random, every_kth_row, every_kth_row_and_column };

struct SamplePattern {
    PatternKind kind = PatternKind::uniform_random;
    int k = 0;  // sample count for uniform_random, stride otherwise
    std::uint32_t seed = 0;
};

// Keeps the patterned subset of gt's pixels, values untouched.
inline DepthImage sample(const DepthImage& gt, const SamplePattern& pattern) {
    DepthImage out(gt.height(), gt.width());
    switch (pattern.kind) {
        case PatternKind::uniform_random: {
            std::vector<std::size_t> idx;
            for (int r = 0; r < gt.height(); ++r)
                for (int c = 0; c < gt.width(); ++c)
                    if (gt.present(r, c)) idx.push_back(static_cast<std::size_t>(r) * gt.width() + c);
            if (pattern.k < 1 || static_cast<std::size_t>(pattern.k) > idx.size())
                fail(ErrorKind::invalid_pattern,
                     "cannot draw " + std::to_string(pattern.k) + " samples from " +
                         std::to_string(idx.size()) + " valid pixels");
            std::mt19937 rng(pattern.seed);
            for (int i = 0; i < pattern.k; ++i) {  // partial Fisher-Yates
                std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
                std::swap(idx[i], idx[pick(rng)]);
                const int r = static_cast<int>(idx[i] / gt.width());
                const int c = static_cast<int>(idx[i] % gt.width());
                out.set(r, c, gt.at(r, c));
            }
            break;
        }
        case PatternKind::every_kth_row: {
            if (pattern.k < 1) fail(ErrorKind::invalid_pattern, "row stride must be at least 1");
            for (int r = 0; r < gt.height(); r += pattern.k)
                for (int c = 0; c < gt.width(); ++c)
                    if (gt.present(r, c)) out.set(r, c, gt.at(r, c));
            break;
        }
        case PatternKind::every_kth_row_and_column: {
            if (pattern.k < 1) fail(ErrorKind::invalid_pattern, "grid stride must be at least 1");
            for (int r = 0; r < gt.height(); r += pattern.k)
                for (int c = 0; c < gt.width(); c += pattern.k)
                    if (gt.present(r, c)) out.set(r, c, gt.at(r, c));
            break;
        }
    }
    return out;
}

inline PatternKind pattern_kind_from_string(const std::string& s) {
    if (s == "uniform") return PatternKind::uniform_random;
    if (s == "rows") return PatternKind::every_kth_row;
    if (s == "grid") return PatternKind::every_kth_row_and_column;
    fail(ErrorKind::invalid_pattern, "unknown sample pattern '" + s + "'");
}

// ---- plain-text spec files -------------------------------------------------
//
//   height=32            width=32
//   range_min=0.5        range_max=9.5
//   noise_sigma=0.01     seed=7        guide_blur=1
//   background=6.0,0.005,0             (base, slope_x, slope_y)
//   object=4,5,10,12,2.0,0,0.01        (top, left, height, width, base, slope_x, slope_y)
//
// '#' lines are comments; 'object=' may repeat; other keys may not.

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_num(std::string_view tok, std::size_t line_no, const std::string& name) {
    const std::string_view t = trim(tok);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v))
        fail(ErrorKind::config,
             name + ":" + std::to_string(line_no) + ": bad number '" + std::string(tok) + "'");
    return v;
}

inline std::vector<double> parse_nums(std::string_view value, std::size_t expected,
                                      std::size_t line_no, const std::string& name) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = value.find(',', start);
        out.push_back(parse_num(value.substr(start, comma - start), line_no, name));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.size() != expected)
        fail(ErrorKind::config, name + ":" + std::to_string(line_no) + ": expected " +
                                    std::to_string(expected) + " comma-separated values");
    return out;
}

inline int parse_int(std::string_view tok, std::size_t line_no, const std::string& name) {
    const double v = parse_num(tok, line_no, name);
    if (v != std::floor(v) || std::abs(v) > 1e9)
        fail(ErrorKind::config,
             name + ":" + std::to_string(line_no) + ": expected an integer, got '" + std::string(tok) + "'");
    return static_cast<int>(v);
}

inline void append_num(std::string& buf, double v) {
    char num[64];
    const auto [ptr, ec] = std::to_chars(num, num + sizeof num, v);
    (void)ec;
    buf.append(num, ptr);
}

}  // namespace detail

inline SceneSpec parse_scene_spec(const std::filesystem::path& path) {
    const std::vector<unsigned char> raw = io::detail::read_all(path);
    const std::string_view text(reinterpret_cast<const char*>(raw.data()), raw.size());
    const std::string name = path.string();

    SceneSpec spec;
    spec.background = PlanarField{};
    std::vector<std::string> seen;
    auto mark_seen = [&](const std::string& key, std::size_t line_no) {
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            fail(ErrorKind::config, name + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        seen.push_back(key);
    };

    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        const std::string_view line = detail::trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorKind::config, name + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));

        if (key == "height") {
            mark_seen(key, line_no);
            spec.height = detail::parse_int(value, line_no, name);
        } else if (key == "width") {
            mark_seen(key, line_no);
            spec.width = detail::parse_int(value, line_no, name);
        } else if (key == "range_min") {
            mark_seen(key, line_no);
            spec.range_min = detail::parse_num(value, line_no, name);
        } else if (key == "range_max") {
            mark_seen(key, line_no);
            spec.range_max = detail::parse_num(value, line_no, name);
        } else if (key == "noise_sigma") {
            mark_seen(key, line_no);
            spec.noise_sigma = detail::parse_num(value, line_no, name);
        } else if (key == "seed") {
            mark_seen(key, line_no);
            const double s = detail::parse_num(value, line_no, name);
            if (s != std::floor(s) || s < 0.0 || s > 4294967295.0)
                fail(ErrorKind::config,
                     name + ":" + std::to_string(line_no) + ": seed must be a 32-bit unsigned integer");
            spec.seed = static_cast<std::uint32_t>(s);
        } else if (key == "guide_blur") {
            mark_seen(key, line_no);
            spec.guide_blur = detail::parse_int(value, line_no, name);
        } else if (key == "background") {
            mark_seen(key, line_no);
            const auto v = detail::parse_nums(value, 3, line_no, name);
            spec.background = PlanarField{v[0], v[1], v[2]};
        } else if (key == "object") {
            const auto v = detail::parse_nums(value, 7, line_no, name);
            for (int i = 0; i < 4; ++i)
                if (v[i] != std::floor(v[i]) || std::abs(v[i]) > 1e9)
                    fail(ErrorKind::config,
                         name + ":" + std::to_string(line_no) + ": object geometry must be integral");
            RectObject o;
            o.top = static_cast<int>(v[0]);
            o.left = static_cast<int>(v[1]);
            o.height = static_cast<int>(v[2]);
            o.width = static_cast<int>(v[3]);
            o.depth = PlanarField{v[4], v[5], v[6]};
            spec.objects.push_back(o);
        } else {
            fail(ErrorKind::config, name + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    validate(spec);
    return spec;
}

inline void write_scene_spec(const std::filesystem::path& path, const SceneSpec& spec) {
    validate(spec);
    std::string buf;
    auto kv = [&](const char* key, double v) {
        buf += key;
        buf.push_back('=');
        detail::append_num(buf, v);
        buf.push_back('\n');
    };
    kv("height", spec.height);
    kv("width", spec.width);
    kv("range_min", spec.range_min);
    kv("range_max", spec.range_max);
    kv("noise_sigma", spec.noise_sigma);
    kv("seed", spec.seed);
    kv("guide_blur", spec.guide_blur);
    buf += "background=";
    detail::append_num(buf, spec.background.base);
    buf.push_back(',');
    detail::append_num(buf, spec.background.slope_x);
    buf.push_back(',');
    detail::append_num(buf, spec.background.slope_y);
    buf.push_back('\n');
    for (const RectObject& o : spec.objects) {
        buf += "object=";
        for (double v : {static_cast<double>(o.top), static_cast<double>(o.left),
                         static_cast<double>(o.height), static_cast<double>(o.width), o.depth.base,
                         o.depth.slope_x, o.depth.slope_y}) {
            detail::append_num(buf, v);
            buf.push_back(',');
        }
        buf.pop_back();
        buf.push_back('\n');
    }
    io::detail::atomic_write(path, buf);
}

// Random scene with a far planar background and a few nearer rectangles.
// Depth bands are chosen so the invariants hold by construction for any rng
// state; validate() still runs inside render() as a safety net.
inline SceneSpec random_scene(std::mt19937& rng, int height, int width, int n_objects,
                              double range_min, double range_max, double noise_sigma,
                              int guide_blur = 1) {
    if (n_objects < 0) fail(ErrorKind::invalid_input, "object count must be non-negative");
    if (n_objects > 0 && (height < 6 || width < 6))
        fail(ErrorKind::invalid_input, "frame too small to place random objects");
    SceneSpec spec;
    spec.height = height;
    spec.width = width;
    spec.range_min = range_min;
    spec.range_max = range_max;
    spec.noise_sigma = noise_sigma;
    spec.guide_blur = guide_blur;
    spec.seed = static_cast<std::uint32_t>(rng());

    const double span = range_max - range_min;
    const int extent = std::max(height, width);
    std::uniform_real_distribution<double> bg_base(range_min + 0.70 * span, range_min + 0.85 * span);
    std::uniform_real_distribution<double> bg_slope(-0.05 * span / extent, 0.05 * span / extent);
    spec.background = PlanarField{bg_base(rng), bg_slope(rng), bg_slope(rng)};

    std::uniform_real_distribution<double> obj_base(range_min + 0.15 * span, range_min + 0.50 * span);
    std::uniform_real_distribution<double> obj_slope(-0.03 * span / extent, 0.03 * span / extent);
    std::uniform_int_distribution<int> obj_h(std::max(2, height / 6), std::max(3, height / 2));
    std::uniform_int_distribution<int> obj_w(std::max(2, width / 6), std::max(3, width / 2));
    for (int i = 0; i < n_objects; ++i) {
        RectObject o;
        o.height = obj_h(rng);
        o.width = obj_w(rng);
        o.top = std::uniform_int_distribution<int>(0, height - o.height)(rng);
        o.left = std::uniform_int_distribution<int>(0, width - o.width)(rng);
        o.depth = PlanarField{obj_base(rng), obj_slope(rng), obj_slope(rng)};
        spec.objects.push_back(o);
    }
    validate(spec);
    return spec;
}

}  // namespace dc::scene
