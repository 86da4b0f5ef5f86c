#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dc/depth_image.hpp"
#include "dc/depth_png.hpp"
#include "dc/metrics.hpp"

namespace fs = std::filesystem;
using dc::DepthImage;

namespace {

fs::path test_dir() {
    static const fs::path dir = fs::path(::testing::TempDir()) / "cli_test";
    fs::create_directories(dir);
    return dir;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(DC_CLI_PATH) + " " + args + " 2>/dev/null";
    RunResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return res;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) res.out.append(buf, n);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Cli, EvalPrintsTheSameCsvTheLibraryProduces) {
    const fs::path dir = test_dir();
    DepthImage pred(4, 4), gt(4, 4);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            gt.set(r, c, 2.0 + r);
            pred.set(r, c, 2.0 + r + 0.25 * c);
        }
    dc::io::save_depth_png(dir / "pred.png", pred);
    dc::io::save_depth_png(dir / "gt.png", gt);

    const auto res = run_cli("eval --pred " + (dir / "pred.png").string() + " --gt " +
                             (dir / "gt.png").string() + " --t 1.0");
    ASSERT_EQ(res.exit_code, 0);
    const auto lines = lines_of(res.out);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], dc::metrics::csv_header());

    // the PNG quantizes to 1/256, so compare against the decoded images
    const DepthImage qpred = dc::io::load_depth_png(dir / "pred.png");
    const DepthImage qgt = dc::io::load_depth_png(dir / "gt.png");
    EXPECT_EQ(lines[1], dc::metrics::csv_row(dc::metrics::evaluate(qpred, qgt, 1.0)));
}

TEST(Cli, AmbiguityLandscapeBottomsOutAtTheMidpoint) {
    const auto res = run_cli("demo-ambiguity --d1 2 --d2 6 --loss mse");
    ASSERT_EQ(res.exit_code, 0);
    const auto lines = lines_of(res.out);
    ASSERT_GT(lines.size(), 2u);
    EXPECT_EQ(lines[0], "d,loss");
    double best_d = 0.0, best_v = 1e300;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv(lines[i]);
        ASSERT_EQ(cells.size(), 2u);
        const double d = std::stod(cells[0]), v = std::stod(cells[1]);
        if (v < best_v) {
            best_v = v;
            best_d = d;
        }
    }
    EXPECT_NEAR(best_d, 4.0, 1e-9);  // mse prefers the depth in the middle of the gap
    EXPECT_NEAR(best_v, 4.0, 1e-9);  // (1/2)((4-2)^2 + (4-6)^2)
}

TEST(Cli, EncodeThenDecodeReproducesTheDepthMapExactly) {
    const fs::path dir = test_dir();
    const std::string synth = (dir / "rt_synth").string();
    const std::string enc = (dir / "rt_enc").string();
    const std::string dec = (dir / "rt_dec").string();
    ASSERT_EQ(run_cli("synth --seed 11 --height 24 --width 24 --out-dir " + synth).exit_code, 0);
    ASSERT_EQ(run_cli("encode --depth " + synth + "/gt.png --out-dir " + enc).exit_code, 0);
    ASSERT_EQ(run_cli("decode --coeffs " + enc + "/dc.bin --out-dir " + dec).exit_code, 0);

    // same values, same writer -> byte-identical files
    EXPECT_EQ(read_file(synth + "/gt.png"), read_file(dec + "/depth.png"));
}

TEST(Cli, ManifestRecordsTheParsedConfiguration) {
    const fs::path dir = test_dir();
    const std::string out = (dir / "mani").string();
    ASSERT_EQ(run_cli("synth --seed 42 --height 16 --width 16 --out-dir " + out).exit_code, 0);
    const std::string manifest = read_file(out + "/manifest.txt");
    EXPECT_NE(manifest.find("command=synth"), std::string::npos);
    EXPECT_NE(manifest.find("seed=42"), std::string::npos);
    EXPECT_NE(manifest.find("pattern=uniform"), std::string::npos);
}

TEST(Cli, DefaultConv1dDemoShowsTheTwoPathsDisagreeingAtTheGap) {
    const auto res = run_cli("demo-conv1d");
    ASSERT_EQ(res.exit_code, 0);
    const auto lines = lines_of(res.out);
    ASSERT_EQ(lines.size(), 6u);
    EXPECT_EQ(lines[0], "index,input,sparse_path,dc_path");
    EXPECT_EQ(lines[3], "2,,4,2");  // missing input; averaged 4 vs mode-kept 2
}

TEST(Cli, TinyAblationIsDeterministic) {
    const std::string args =
        "ablate --scenes 2 --eval-scenes 1 --height 10 --width 10 --k 25 --epochs 2 --hidden 3 "
        "--seed 5";
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    ASSERT_EQ(a.exit_code, 0);
    ASSERT_EQ(b.exit_code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto lines = lines_of(a.out);
    ASSERT_EQ(lines.size(), 5u);  // header + one row per combination
    EXPECT_EQ(split_csv(lines[1])[0], "sp");
    EXPECT_EQ(split_csv(lines[2])[0], "dc");
    EXPECT_EQ(split_csv(lines[1])[1], "mse");
    EXPECT_EQ(split_csv(lines[3])[1], "ce");
}

TEST(Cli, ExitCodesDistinguishFailureClasses) {
    const fs::path dir = test_dir();
    // missing file -> filesystem class
    EXPECT_EQ(run_cli("decode --coeffs " + (dir / "nosuch.bin").string()).exit_code, 3);

    // mismatched image sizes -> bad-input class
    DepthImage a(4, 4), b(4, 5);
    a.set(0, 0, 1.0);
    b.set(0, 0, 1.0);
    dc::io::save_depth_png(dir / "a.png", a);
    dc::io::save_depth_png(dir / "b.png", b);
    EXPECT_EQ(
        run_cli("eval --pred " + (dir / "a.png").string() + " --gt " + (dir / "b.png").string())
            .exit_code,
        4);

    // nothing to compare -> empty-data class
    DepthImage p(4, 4), g(4, 4);
    p.set(0, 0, 1.0);
    g.set(1, 1, 1.0);
    dc::io::save_depth_png(dir / "p.png", p);
    dc::io::save_depth_png(dir / "g.png", g);
    EXPECT_EQ(
        run_cli("eval --pred " + (dir / "p.png").string() + " --gt " + (dir / "g.png").string())
            .exit_code,
        5);

    // bad usage -> parser class
    EXPECT_EQ(run_cli("no-such-command").exit_code, 2);
    EXPECT_EQ(run_cli("eval --pred x.png").exit_code, 2);

    // inconsistent training configuration
    EXPECT_EQ(run_cli("train-toy --scenes 1 --eval-scenes 1 --height 8 --width 8 --k 10 --lr 0")
                  .exit_code,
              4);

    EXPECT_EQ(run_cli("--help").exit_code, 0);
}
