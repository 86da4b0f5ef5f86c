// Command-line front end: every pipeline in the library as one subcommand,
// reproducible from the manifest it writes next to its outputs.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dc/analysis.hpp"
#include "dc/bin_grid.hpp"
#include "dc/codec.hpp"
#include "dc/depth_png.hpp"
#include "dc/error.hpp"
#include "dc/loss.hpp"
#include "dc/metrics.hpp"
#include "dc/pgm.hpp"
#include "dc/pointcloud.hpp"
#include "dc/scene.hpp"
#include "dc/tensor_io.hpp"
#include "dc/toy_model.hpp"

namespace fs = std::filesystem;
using dc::BinGrid;
using dc::DepthImage;
using dc::ErrorKind;

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::format:
        case ErrorKind::io:
            return 3;
        case ErrorKind::invalid_input:
        case ErrorKind::out_of_range:
        case ErrorKind::normalization:
        case ErrorKind::invalid_gt:
        case ErrorKind::invalid_spec:
        case ErrorKind::invalid_pattern:
        case ErrorKind::config:
            return 4;
        case ErrorKind::missing_pixel:
        case ErrorKind::empty_mask:
        case ErrorKind::degenerate_input:
            return 5;
        case ErrorKind::training_diverged:
            return 6;
    }
    return 1;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

using Manifest = std::vector<std::pair<std::string, std::string>>;

fs::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) dc::fail(ErrorKind::io, "cannot create output directory '" + dir + "': " + ec.message());
    return fs::path(dir);
}

void write_manifest(const fs::path& dir, const std::string& command, const Manifest& kv) {
    std::string text = "command=" + command + "\n";
    for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
    dc::io::save_text(dir / "manifest.txt", text);
}

// shared --d-min / --d-max / --bins flags
struct GridOpts {
    double d_min = 0.0;
    double d_max = 10.0;
    int bins = 20;
};

void add_grid_flags(CLI::App* sub, GridOpts& g) {
    sub->add_option("--d-min", g.d_min, "lower edge of the bin range");
    sub->add_option("--d-max", g.d_max, "upper edge of the bin range");
    sub->add_option("--bins", g.bins, "number of depth bins");
}

BinGrid make_grid(const GridOpts& g) { return BinGrid(g.d_min, g.d_max, g.bins); }

void append_grid(Manifest& m, const GridOpts& g) {
    m.emplace_back("d_min", fmt(g.d_min));
    m.emplace_back("d_max", fmt(g.d_max));
    m.emplace_back("bins", std::to_string(g.bins));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double_token(const std::string& tok, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        dc::fail(ErrorKind::invalid_input, "cannot parse " + what + " value '" + tok + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depth coefficients toolkit: encode/decode depth maps, evaluate predictions,\n"
                 "subsample point clouds, synthesize scenes, and train the toy completion model"};
    app.require_subcommand(1);

    // ---- encode ----
    struct {
        std::string depth, out_dir = "out-encode";
        GridOpts grid;
        bool clamp = false;
    } enc;
    auto* cmd_encode = app.add_subcommand("encode", "depth PNG -> coefficient tensor");
    cmd_encode->add_option("--depth", enc.depth, "16-bit depth PNG (value/256 m, 0 missing)")
        ->required();
    cmd_encode->add_option("--out-dir", enc.out_dir, "output directory");
    cmd_encode->add_flag("--clamp", enc.clamp, "clamp depths into the representable band");
    add_grid_flags(cmd_encode, enc.grid);
    cmd_encode->callback([&] {
        const BinGrid grid = make_grid(enc.grid);
        const DepthImage depth = dc::io::load_depth_png(enc.depth);
        const dc::DCImage coeffs = dc::encode_image(depth, grid, enc.clamp);
        const fs::path dir = prepare_out_dir(enc.out_dir);
        dc::io::save_dc_tensor(dir / "dc.bin", coeffs);
        Manifest m{{"depth", enc.depth}, {"clamp", enc.clamp ? "1" : "0"}};
        append_grid(m, enc.grid);
        write_manifest(dir, "encode", m);
        std::cout << "encoded " << depth.present_count() << " pixels -> " << (dir / "dc.bin").string()
                  << "\n";
    });

    // ---- decode ----
    struct {
        std::string coeffs, out_dir = "out-decode", mode = "peak";
        GridOpts grid;
    } dec;
    auto* cmd_decode = app.add_subcommand("decode", "coefficient tensor -> depth PNG");
    cmd_decode->add_option("--coeffs", dec.coeffs, "coefficient tensor file")->required();
    cmd_decode->add_option("--out-dir", dec.out_dir, "output directory");
    cmd_decode->add_option("--mode", dec.mode, "peak (mode-seeking) or mean (full expectation)")
        ->check(CLI::IsMember({"peak", "mean"}));
    add_grid_flags(cmd_decode, dec.grid);
    cmd_decode->callback([&] {
        const BinGrid grid = make_grid(dec.grid);
        const dc::DCImage coeffs = dc::io::load_dc_tensor(dec.coeffs, grid);
        DepthImage depth(coeffs.height(), coeffs.width());
        for (int r = 0; r < coeffs.height(); ++r)
            for (int c = 0; c < coeffs.width(); ++c) {
                if (coeffs.pixel_missing(r, c)) continue;
                const auto px = coeffs.pixel(r, c);
                depth.set(r, c, dec.mode == "peak" ? dc::decode_3coeff(px, grid)
                                                   : dc::decode_all(px, grid));
            }
        const fs::path dir = prepare_out_dir(dec.out_dir);
        dc::io::save_depth_png(dir / "depth.png", depth);
        Manifest m{{"coeffs", dec.coeffs}, {"mode", dec.mode}};
        append_grid(m, dec.grid);
        write_manifest(dir, "decode", m);
        std::cout << "decoded " << depth.present_count() << " pixels -> "
                  << (dir / "depth.png").string() << "\n";
    });

    // ---- eval ----
    struct {
        std::string pred, gt, out_dir;
        double t = 1.0;
    } ev;
    auto* cmd_eval = app.add_subcommand("eval", "score a prediction against ground truth");
    cmd_eval->add_option("--pred", ev.pred, "predicted depth PNG")->required();
    cmd_eval->add_option("--gt", ev.gt, "ground-truth depth PNG")->required();
    cmd_eval->add_option("--t", ev.t, "error cap for the thresholded metrics");
    cmd_eval->add_option("--out-dir", ev.out_dir, "also write metrics.csv there");
    cmd_eval->callback([&] {
        const DepthImage pred = dc::io::load_depth_png(ev.pred);
        const DepthImage gt = dc::io::load_depth_png(ev.gt);
        const dc::metrics::MetricReport rep = dc::metrics::evaluate(pred, gt, ev.t);
        const std::string csv = dc::metrics::csv_header() + "\n" + dc::metrics::csv_row(rep) + "\n";
        std::cout << csv;
        if (!ev.out_dir.empty()) {
            const fs::path dir = prepare_out_dir(ev.out_dir);
            dc::io::save_text(dir / "metrics.csv", csv);
            write_manifest(dir, "eval", {{"pred", ev.pred}, {"gt", ev.gt}, {"t", fmt(ev.t)}});
        }
    });

    // ---- subsample ----
    struct {
        std::string points, out_dir = "out-subsample", keep;
        int every = 4, rings = 64;
    } sub;
    auto* cmd_sub = app.add_subcommand("subsample", "keep a subset of scanner rings");
    cmd_sub->add_option("--points", sub.points, "point CSV (x,y,z[,ring])")->required();
    cmd_sub->add_option("--keep-every", sub.every, "keep rings 0, k, 2k, ...");
    cmd_sub->add_option("--keep", sub.keep, "explicit comma-separated ring list (overrides stride)");
    cmd_sub->add_option("--rings", sub.rings, "ring count when the file has no ring column");
    cmd_sub->add_option("--out-dir", sub.out_dir, "output directory");
    cmd_sub->callback([&] {
        std::vector<dc::io::Point> pts = dc::io::load_points_csv(sub.points);
        const bool had_rings = !pts.empty() && pts.front().ring.has_value();
        if (!had_rings) dc::io::estimate_rings_from_elevation(pts, sub.rings);
        std::vector<dc::io::Point> kept;
        if (!sub.keep.empty()) {
            std::set<int> keep_set;
            for (const std::string& tok : split_list(sub.keep))
                keep_set.insert(static_cast<int>(parse_double_token(tok, "ring")));
            kept = dc::io::subsample_rings(pts, keep_set);
        } else {
            kept = dc::io::subsample_rings(pts, sub.every);
        }
        const fs::path dir = prepare_out_dir(sub.out_dir);
        dc::io::save_points_csv(dir / "points.csv", kept);
        Manifest m{{"points", sub.points},
                   {"keep_every", std::to_string(sub.every)},
                   {"keep", sub.keep},
                   {"rings", std::to_string(sub.rings)},
                   {"rings_estimated", had_rings ? "0" : "1"}};
        write_manifest(dir, "subsample", m);
        std::cout << "kept " << kept.size() << " of " << pts.size() << " points -> "
                  << (dir / "points.csv").string() << "\n";
    });

    // ---- project ----
    struct {
        std::string points, out_dir = "out-project";
        dc::io::Camera cam;
    } proj;
    proj.cam.fx = proj.cam.fy = 100.0;
    proj.cam.cx = proj.cam.cy = 0.0;
    auto* cmd_proj = app.add_subcommand("project", "pinhole-project points to a depth PNG");
    cmd_proj->add_option("--points", proj.points, "point CSV in the camera frame")->required();
    cmd_proj->add_option("--fx", proj.cam.fx, "focal length x (px)");
    cmd_proj->add_option("--fy", proj.cam.fy, "focal length y (px)");
    cmd_proj->add_option("--cx", proj.cam.cx, "principal point x (px)")->required();
    cmd_proj->add_option("--cy", proj.cam.cy, "principal point y (px)")->required();
    cmd_proj->add_option("--width", proj.cam.width, "image width (px)")->required();
    cmd_proj->add_option("--height", proj.cam.height, "image height (px)")->required();
    cmd_proj->add_option("--out-dir", proj.out_dir, "output directory");
    cmd_proj->callback([&] {
        const std::vector<dc::io::Point> pts = dc::io::load_points_csv(proj.points);
        const dc::io::ProjectionResult res = dc::io::project_to_image(pts, proj.cam);
        const fs::path dir = prepare_out_dir(proj.out_dir);
        dc::io::save_depth_png(dir / "depth.png", res.image);
        Manifest m{{"points", proj.points},   {"fx", fmt(proj.cam.fx)},
                   {"fy", fmt(proj.cam.fy)},  {"cx", fmt(proj.cam.cx)},
                   {"cy", fmt(proj.cam.cy)},  {"width", std::to_string(proj.cam.width)},
                   {"height", std::to_string(proj.cam.height)}};
        write_manifest(dir, "project", m);
        std::cout << "projected " << res.image.present_count() << " pixels (behind camera "
                  << res.dropped_behind << ", out of frame " << res.dropped_out_of_frame
                  << ", occluded " << res.collisions << ") -> " << (dir / "depth.png").string()
                  << "\n";
    });

    // ---- synth ----
    struct {
        std::string spec, out_dir = "out-synth", pattern = "uniform";
        int height = 32, width = 32, objects = 2, k = 128;
        double range_min = 0.5, range_max = 9.5, noise = 0.02;
        std::uint32_t seed = 0;
    } sy;
    auto* cmd_synth = app.add_subcommand("synth", "render a synthetic scene and sample it");
    cmd_synth->add_option("--spec", sy.spec, "scene description file (otherwise randomized)");
    cmd_synth->add_option("--height", sy.height, "random scene height");
    cmd_synth->add_option("--width", sy.width, "random scene width");
    cmd_synth->add_option("--objects", sy.objects, "random scene object count");
    cmd_synth->add_option("--range-min", sy.range_min, "closest allowed depth");
    cmd_synth->add_option("--range-max", sy.range_max, "farthest allowed depth");
    cmd_synth->add_option("--noise", sy.noise, "surface noise sigma");
    cmd_synth->add_option("--pattern", sy.pattern, "sampling pattern: uniform, rows, grid")
        ->check(CLI::IsMember({"uniform", "rows", "grid"}));
    cmd_synth->add_option("--k", sy.k, "sample count (uniform) or stride (rows/grid)");
    cmd_synth->add_option("--seed", sy.seed, "random seed");
    cmd_synth->add_option("--out-dir", sy.out_dir, "output directory");
    cmd_synth->callback([&] {
        dc::scene::SceneSpec spec;
        if (!sy.spec.empty()) {
            spec = dc::scene::parse_scene_spec(sy.spec);
        } else {
            std::mt19937 rng(sy.seed);
            spec = dc::scene::random_scene(rng, sy.height, sy.width, sy.objects, sy.range_min,
                                           sy.range_max, sy.noise);
        }
        const DepthImage gt = dc::scene::render(spec);
        dc::scene::SamplePattern pattern;
        pattern.kind = dc::scene::pattern_kind_from_string(sy.pattern);
        pattern.k = sy.k;
        pattern.seed = sy.seed;
        const DepthImage sparse = dc::scene::sample(gt, pattern);
        const dc::Tensor3 guide = dc::scene::render_guide(spec);

        const fs::path dir = prepare_out_dir(sy.out_dir);
        dc::io::save_depth_png(dir / "gt.png", gt);
        dc::io::save_depth_png(dir / "sparse.png", sparse);
        dc::io::save_pgm(dir / "guide.pgm", guide.height(), guide.width(), guide.data());
        dc::scene::write_scene_spec(dir / "spec.txt", spec);
        Manifest m{{"spec", sy.spec.empty() ? (dir / "spec.txt").string() : sy.spec},
                   {"pattern", sy.pattern},
                   {"k", std::to_string(sy.k)},
                   {"seed", std::to_string(sy.seed)}};
        write_manifest(dir, "synth", m);
        std::cout << "scene " << spec.height << "x" << spec.width << " with "
                  << spec.objects.size() << " objects; kept " << sparse.present_count() << " of "
                  << gt.present_count() << " samples -> " << dir.string() << "\n";
    });

    // ---- demo-ambiguity ----
    struct {
        double d1 = 2.0, d2 = 6.0, t = 1.0;
        int samples = 401;
        std::string loss = "mse", out_dir;
    } amb;
    auto* cmd_amb = app.add_subcommand(
        "demo-ambiguity", "loss landscape for one pixel torn between two depths");
    cmd_amb->add_option("--d1", amb.d1, "nearer surface depth");
    cmd_amb->add_option("--d2", amb.d2, "farther surface depth");
    cmd_amb->add_option("--loss", amb.loss, "mse, mae, tmse or tmae")
        ->check(CLI::IsMember({"mse", "mae", "tmse", "tmae"}));
    cmd_amb->add_option("--t", amb.t, "threshold for tmse/tmae");
    cmd_amb->add_option("--samples", amb.samples, "landscape sample count");
    cmd_amb->add_option("--out-dir", amb.out_dir, "also write landscape.csv there");
    cmd_amb->callback([&] {
        const dc::loss::Landscape land = dc::loss::two_point_loss_landscape(
            amb.d1, amb.d2, dc::loss::landscape_loss_from_string(amb.loss), amb.t, amb.samples);
        std::ostringstream os;
        os << std::setprecision(12) << "d,loss\n";
        for (const auto& [d, v] : land.samples) os << d << ',' << v << '\n';
        std::cout << os.str();
        std::cerr << "argmin d=" << land.argmin_d << " loss=" << land.min_loss << "\n";
        if (!amb.out_dir.empty()) {
            const fs::path dir = prepare_out_dir(amb.out_dir);
            dc::io::save_text(dir / "landscape.csv", os.str());
            write_manifest(dir, "demo-ambiguity",
                           {{"d1", fmt(amb.d1)},
                            {"d2", fmt(amb.d2)},
                            {"loss", amb.loss},
                            {"t", fmt(amb.t)},
                            {"samples", std::to_string(amb.samples)}});
        }
    });

    // ---- demo-conv1d ----
    struct {
        std::string signal = "2,2,-,6,6", kernel = "1,1,1", out_dir;
        GridOpts grid{0.5, 8.5, 8};
    } c1;
    auto* cmd_c1 = app.add_subcommand("demo-conv1d",
                                      "smooth a sparse 1-d depth slice along both paths");
    cmd_c1->add_option("--signal", c1.signal, "comma-separated depths, '-' for missing");
    cmd_c1->add_option("--kernel", c1.kernel, "comma-separated non-negative weights, odd length");
    cmd_c1->add_option("--out-dir", c1.out_dir, "also write conv1d.csv there");
    add_grid_flags(cmd_c1, c1.grid);
    cmd_c1->callback([&] {
        std::vector<std::optional<double>> signal;
        for (const std::string& tok : split_list(c1.signal)) {
            if (tok == "-" || tok.empty())
                signal.emplace_back(std::nullopt);
            else
                signal.emplace_back(parse_double_token(tok, "signal"));
        }
        std::vector<double> kernel;
        for (const std::string& tok : split_list(c1.kernel))
            kernel.push_back(parse_double_token(tok, "kernel"));

        const auto res = dc::analysis::demo_conv1d(signal, kernel, make_grid(c1.grid));
        std::ostringstream os;
        os << std::setprecision(12) << "index,input,sparse_path,dc_path\n";
        for (std::size_t i = 0; i < signal.size(); ++i) {
            os << i << ',';
            if (signal[i]) os << *signal[i];
            os << ',';
            if (res.sparse_path[i]) os << *res.sparse_path[i];
            os << ',';
            if (res.dc_path[i]) os << *res.dc_path[i];
            os << '\n';
        }
        std::cout << os.str();
        if (!c1.out_dir.empty()) {
            const fs::path dir = prepare_out_dir(c1.out_dir);
            dc::io::save_text(dir / "conv1d.csv", os.str());
            Manifest m{{"signal", c1.signal}, {"kernel", c1.kernel}};
            append_grid(m, c1.grid);
            write_manifest(dir, "demo-conv1d", m);
        }
    });

    // ---- bev ----
    struct {
        std::string depth, out_dir = "out-bev";
        dc::io::Camera cam;
        dc::analysis::BEVSpec spec;
    } bev;
    bev.cam.fx = bev.cam.fy = 100.0;
    auto* cmd_bev = app.add_subcommand("bev", "top-down occupancy counts from a depth map");
    cmd_bev->add_option("--depth", bev.depth, "16-bit depth PNG")->required();
    cmd_bev->add_option("--fx", bev.cam.fx, "focal length x (px)");
    cmd_bev->add_option("--fy", bev.cam.fy, "focal length y (px)");
    cmd_bev->add_option("--cx", bev.cam.cx, "principal point x (px)")->required();
    cmd_bev->add_option("--cy", bev.cam.cy, "principal point y (px)")->required();
    cmd_bev->add_option("--x-min", bev.spec.x_min, "lateral range low (m)");
    cmd_bev->add_option("--x-max", bev.spec.x_max, "lateral range high (m)");
    cmd_bev->add_option("--z-min", bev.spec.z_min, "forward range low (m)");
    cmd_bev->add_option("--z-max", bev.spec.z_max, "forward range high (m)");
    cmd_bev->add_option("--cell", bev.spec.cell, "cell edge length (m)");
    cmd_bev->add_option("--out-dir", bev.out_dir, "output directory");
    cmd_bev->callback([&] {
        const DepthImage depth = dc::io::load_depth_png(bev.depth);
        bev.cam.width = depth.width();
        bev.cam.height = depth.height();
        const dc::analysis::BEVGrid grid = dc::analysis::bev_project(depth, bev.cam, bev.spec);

        std::ostringstream os;
        os << "z_index,x_index,count\n";
        std::uint64_t max_count = 0;
        for (int iz = 0; iz < grid.nz; ++iz)
            for (int ix = 0; ix < grid.nx; ++ix) {
                const std::uint64_t n = grid.at(iz, ix);
                max_count = std::max(max_count, n);
                if (n > 0) os << iz << ',' << ix << ',' << n << '\n';
            }
        dc::Tensor3 heat(1, grid.nz, grid.nx, 0.0);
        if (max_count > 0)
            for (int iz = 0; iz < grid.nz; ++iz)
                for (int ix = 0; ix < grid.nx; ++ix)
                    heat.at(0, iz, ix) = static_cast<double>(grid.at(iz, ix)) /
                                         static_cast<double>(max_count);

        const fs::path dir = prepare_out_dir(bev.out_dir);
        dc::io::save_text(dir / "bev.csv", os.str());
        dc::io::save_pgm(dir / "bev.pgm", heat.height(), heat.width(), heat.data());
        Manifest m{{"depth", bev.depth},         {"fx", fmt(bev.cam.fx)},
                   {"fy", fmt(bev.cam.fy)},      {"cx", fmt(bev.cam.cx)},
                   {"cy", fmt(bev.cam.cy)},      {"x_min", fmt(bev.spec.x_min)},
                   {"x_max", fmt(bev.spec.x_max)}, {"z_min", fmt(bev.spec.z_min)},
                   {"z_max", fmt(bev.spec.z_max)}, {"cell", fmt(bev.spec.cell)}};
        write_manifest(dir, "bev", m);
        std::cout << "binned " << grid.total_in_range() << " pixels (" << grid.out_of_range
                  << " out of range) into " << grid.nz << "x" << grid.nx << " cells -> "
                  << dir.string() << "\n";
    });

    // ---- shared toy-model flags ----
    struct ToyOpts {
        dc::toy::TrainConfig cfg = dc::toy::AblationSpec{}.base;  // one schedule everywhere
        GridOpts grid;
        int scenes = 64, eval_scenes = 16, height = 20, width = 20, objects = 2, k = 60;
        double noise = 0.02, t = 1.0;
        std::string pattern = "uniform", optimizer = "adam", input = "dc", loss = "ce";
        bool no_guide = false;
    };
    auto add_toy_flags = [](CLI::App* cmd, ToyOpts& o, bool with_modes) {
        cmd->add_option("--scenes", o.scenes, "training scene count");
        cmd->add_option("--eval-scenes", o.eval_scenes, "held-out scene count");
        cmd->add_option("--height", o.height, "scene height");
        cmd->add_option("--width", o.width, "scene width");
        cmd->add_option("--objects", o.objects, "objects per scene");
        cmd->add_option("--noise", o.noise, "surface noise sigma");
        cmd->add_option("--pattern", o.pattern, "sampling pattern: uniform, rows, grid")
            ->check(CLI::IsMember({"uniform", "rows", "grid"}));
        cmd->add_option("--k", o.k, "samples per scene (uniform) or stride");
        cmd->add_option("--t", o.t, "error cap for scoring");
        cmd->add_option("--epochs", o.cfg.epochs, "training epochs");
        cmd->add_option("--lr", o.cfg.lr, "learning rate");
        cmd->add_option("--batch", o.cfg.batch_size, "scenes per update");
        cmd->add_option("--hidden", o.cfg.hidden, "hidden channels");
        cmd->add_option("--halve-every", o.cfg.lr_halve_every, "epochs between lr halvings");
        cmd->add_option("--threads", o.cfg.threads, "worker threads per batch");
        cmd->add_option("--optimizer", o.optimizer, "adam or sgd")
            ->check(CLI::IsMember({"adam", "sgd"}));
        cmd->add_option("--seed", o.cfg.seed, "random seed");
        cmd->add_flag("--no-guide", o.no_guide, "drop the grayscale guide channel");
        if (with_modes) {
            cmd->add_option("--input", o.input, "network input: sp or dc")
                ->check(CLI::IsMember({"sp", "dc"}));
            cmd->add_option("--loss", o.loss, "training loss: mse or ce")
                ->check(CLI::IsMember({"mse", "ce"}));
        }
    };
    auto finish_toy_cfg = [](ToyOpts& o) {
        o.cfg.grid = BinGrid(o.grid.d_min, o.grid.d_max, o.grid.bins);
        o.cfg.optimizer = o.optimizer == "adam" ? dc::toy::OptimizerKind::adam
                                                : dc::toy::OptimizerKind::sgd;
        o.cfg.use_guide = !o.no_guide;
    };
    auto toy_manifest = [](const ToyOpts& o, bool with_modes) {
        Manifest m{{"scenes", std::to_string(o.scenes)},
                   {"eval_scenes", std::to_string(o.eval_scenes)},
                   {"height", std::to_string(o.height)},
                   {"width", std::to_string(o.width)},
                   {"objects", std::to_string(o.objects)},
                   {"noise", fmt(o.noise)},
                   {"pattern", o.pattern},
                   {"k", std::to_string(o.k)},
                   {"t", fmt(o.t)},
                   {"epochs", std::to_string(o.cfg.epochs)},
                   {"lr", fmt(o.cfg.lr)},
                   {"batch", std::to_string(o.cfg.batch_size)},
                   {"hidden", std::to_string(o.cfg.hidden)},
                   {"halve_every", std::to_string(o.cfg.lr_halve_every)},
                   {"threads", std::to_string(o.cfg.threads)},
                   {"optimizer", o.optimizer},
                   {"seed", std::to_string(o.cfg.seed)},
                   {"guide", o.no_guide ? "0" : "1"}};
        if (with_modes) {
            m.emplace_back("input", o.input);
            m.emplace_back("loss", o.loss);
        }
        return m;
    };
    auto toy_datasets = [](const ToyOpts& o) {
        dc::scene::SamplePattern pattern;
        pattern.kind = dc::scene::pattern_kind_from_string(o.pattern);
        pattern.k = o.k;
        auto train = dc::toy::make_scene_dataset(o.scenes, o.height, o.width, o.objects, 0.5, 9.5,
                                                 o.noise, pattern, o.cfg.seed);
        auto eval = dc::toy::make_scene_dataset(o.eval_scenes, o.height, o.width, o.objects, 0.5,
                                                9.5, o.noise, pattern, o.cfg.seed + 1000003u);
        return std::make_pair(std::move(train), std::move(eval));
    };

    // ---- train-toy ----
    struct {
        ToyOpts toy;
        std::string out_dir = "out-train";
    } tt;
    auto* cmd_train = app.add_subcommand("train-toy", "train the small completion network");
    add_toy_flags(cmd_train, tt.toy, /*with_modes=*/true);
    add_grid_flags(cmd_train, tt.toy.grid);
    cmd_train->add_option("--out-dir", tt.out_dir, "output directory");
    cmd_train->callback([&] {
        finish_toy_cfg(tt.toy);
        tt.toy.cfg.input_mode = dc::toy::input_mode_from_string(tt.toy.input);
        tt.toy.cfg.loss_mode = dc::toy::loss_mode_from_string(tt.toy.loss);
        auto [train_scenes, eval_scenes] = toy_datasets(tt.toy);

        const dc::toy::TrainResult res = dc::toy::train(tt.toy.cfg, train_scenes);
        const dc::toy::EvalSummary score =
            dc::toy::score_on_scenes(res.model, eval_scenes, tt.toy.t);

        const fs::path dir = prepare_out_dir(tt.out_dir);
        dc::toy::save_model(dir / "params.bin", res.model);
        std::ostringstream loss_csv;
        loss_csv << std::setprecision(12) << "epoch,loss\n";
        for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
            loss_csv << e << ',' << res.epoch_loss[e] << '\n';
        dc::io::save_text(dir / "train_loss.csv", loss_csv.str());

        std::ostringstream metrics_csv;
        metrics_csv << std::setprecision(12)
                    << dc::metrics::csv_header() << ",mixed_pixel_rate\n"
                    << dc::metrics::csv_row(score.report) << ',' << score.mixed.rate() << '\n';
        dc::io::save_text(dir / "metrics.csv", metrics_csv.str());

        Manifest m = toy_manifest(tt.toy, true);
        append_grid(m, tt.toy.grid);
        write_manifest(dir, "train-toy", m);
        std::cout << metrics_csv.str();
        std::cerr << "final training loss " << std::setprecision(12) << res.epoch_loss.back()
                  << "; artifacts in " << dir.string() << "\n";
    });

    // ---- ablate ----
    struct {
        ToyOpts toy;
        std::string out_dir;
    } ab;
    auto* cmd_ablate =
        app.add_subcommand("ablate", "train all four input/loss combinations and rank them");
    add_toy_flags(cmd_ablate, ab.toy, /*with_modes=*/false);
    add_grid_flags(cmd_ablate, ab.toy.grid);
    cmd_ablate->add_option("--out-dir", ab.out_dir, "also write ablation.csv there");
    cmd_ablate->callback([&] {
        finish_toy_cfg(ab.toy);
        auto [train_scenes, eval_scenes] = toy_datasets(ab.toy);
        const std::vector<dc::toy::AblationRow> rows = dc::toy::run_ablation(
            ab.toy.cfg, train_scenes, eval_scenes, ab.toy.t);
        std::ostringstream os;
        os << dc::toy::ablation_csv_header() << '\n';
        for (const auto& row : rows) os << dc::toy::ablation_csv_row(row) << '\n';
        std::cout << os.str();
        if (!ab.out_dir.empty()) {
            const fs::path dir = prepare_out_dir(ab.out_dir);
            dc::io::save_text(dir / "ablation.csv", os.str());
            Manifest m = toy_manifest(ab.toy, false);
            append_grid(m, ab.toy.grid);
            write_manifest(dir, "ablate", m);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const dc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
