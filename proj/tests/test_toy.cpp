#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "dc/codec.hpp"
#include "dc/error.hpp"
#include "dc/loss.hpp"
#include "dc/scene.hpp"
#include "dc/toy_model.hpp"

using dc::BinGrid;
using dc::DCVector;
using dc::DepthImage;
using dc::ErrorKind;
using dc::Tensor3;
namespace toy = dc::toy;
namespace fs = std::filesystem;

namespace {

void expect_kind(ErrorKind want, auto&& fn) {
    try {
        fn();
        FAIL() << "expected throw";
    } catch (const dc::Error& e) {
        EXPECT_EQ(e.kind(), want) << e.what();
    }
}

fs::path test_dir() {
    static const fs::path dir = fs::path(::testing::TempDir()) / "toy_test";
    fs::create_directories(dir);
    return dir;
}

// straightforward quadruple loop the optimized pass must agree with
Tensor3 conv_naive(const toy::ConvLayer& L, const Tensor3& in) {
    Tensor3 out(L.out_ch, in.height(), in.width(), 0.0);
    for (int o = 0; o < L.out_ch; ++o)
        for (int y = 0; y < in.height(); ++y)
            for (int x = 0; x < in.width(); ++x) {
                double s = L.b[o];
                for (int i = 0; i < L.in_ch; ++i)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int yy = y + ky - 1, xx = x + kx - 1;
                            if (yy < 0 || yy >= in.height() || xx < 0 || xx >= in.width()) continue;
                            s += L.wat(o, i, ky, kx) * in.at(i, yy, xx);
                        }
                out.at(o, y, x) = s;
            }
    return out;
}

toy::ConvLayer random_layer(int in, int out, std::mt19937& rng) {
    toy::ConvLayer L(in, out);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& w : L.w) w = u(rng);
    for (double& b : L.b) b = u(rng);
    return L;
}

Tensor3 random_tensor(int c, int h, int w, std::mt19937& rng) {
    Tensor3 t(c, h, w);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (double& v : t.data()) v = u(rng);
    return t;
}

std::vector<toy::SceneData> tiny_dataset(int count, int h, int w, std::uint32_t seed) {
    dc::scene::SamplePattern pattern;
    pattern.kind = dc::scene::PatternKind::uniform_random;
    pattern.k = h * w / 3;
    return toy::make_scene_dataset(count, h, w, 1, 0.5, 9.5, 0.0, pattern, seed);
}

bool same_params(const toy::ToyModel& a, const toy::ToyModel& b) {
    return a.l1.w == b.l1.w && a.l1.b == b.l1.b && a.l2.w == b.l2.w && a.l2.b == b.l2.b &&
           a.l3.w == b.l3.w && a.l3.b == b.l3.b;
}

}  // namespace

TEST(Conv, MatchesNaiveReference) {
    std::mt19937 rng(1);
    const toy::ConvLayer L = random_layer(3, 2, rng);
    const Tensor3 in = random_tensor(3, 5, 7, rng);
    const Tensor3 fast = toy::detail::conv_forward(L, in);
    const Tensor3 slow = conv_naive(L, in);
    ASSERT_TRUE(fast.same_shape(slow));
    for (std::size_t i = 0; i < fast.data().size(); ++i)
        EXPECT_NEAR(fast.data()[i], slow.data()[i], 1e-12);
}

TEST(Conv, ZeroWeightsLeaveOnlyTheBias) {
    toy::ConvLayer L(2, 2);
    L.b = {0.5, -1.5};
    std::mt19937 rng(2);
    const Tensor3 out = toy::detail::conv_forward(L, random_tensor(2, 4, 4, rng));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            EXPECT_DOUBLE_EQ(out.at(0, y, x), 0.5);
            EXPECT_DOUBLE_EQ(out.at(1, y, x), -1.5);
        }
}

TEST(Conv, CenterTapIdentityCopiesTheInput) {
    toy::ConvLayer L(1, 1);
    L.wat(0, 0, 1, 1) = 1.0;
    std::mt19937 rng(3);
    const Tensor3 in = random_tensor(1, 6, 5, rng);
    const Tensor3 out = toy::detail::conv_forward(L, in);
    for (std::size_t i = 0; i < in.data().size(); ++i)
        EXPECT_DOUBLE_EQ(out.data()[i], in.data()[i]);
}

namespace {

double loss_of(const toy::ToyModel& m, const Tensor3& input, const DepthImage& gt,
               const dc::DCImage* tgt) {
    toy::ModelGrads scratch(m);
    return toy::scene_loss_grads(m, input, gt, tgt, scratch);
}

void check_param_gradients(toy::TrainConfig cfg, std::uint32_t seed) {
    auto scenes = tiny_dataset(1, 6, 6, seed);
    const Tensor3 input = toy::build_input(scenes[0], cfg);
    dc::DCImage target_dc = dc::encode_image(scenes[0].gt, cfg.grid, true);
    const dc::DCImage* tgt = cfg.loss_mode == toy::LossMode::ce ? &target_dc : nullptr;

    toy::ToyModel model = toy::make_model(cfg);
    // biases start at zero and all-missing patches are all-zero, which parks
    // pre-activations exactly on the relu kink where finite differences see
    // half-slopes; nudge every bias off it first
    std::mt19937 brng(seed + 1);
    std::uniform_real_distribution<double> mag(0.01, 0.03);
    std::bernoulli_distribution flip(0.5);
    for (auto* arr : {&model.l1.b, &model.l2.b, &model.l3.b})
        for (double& v : *arr) v = flip(brng) ? mag(brng) : -mag(brng);

    toy::ModelGrads grads(model);
    toy::scene_loss_grads(model, input, scenes[0].gt, tgt, grads);

    auto params = toy::detail::param_arrays(model);
    auto gs = toy::detail::grad_arrays(grads);
    std::mt19937 rng(seed + 17);
    const double h = 1e-4;
    int checked = 0;
    while (checked < 40) {
        const int a = std::uniform_int_distribution<int>(0, 5)(rng);
        std::vector<double>& p = *params[a];
        const std::size_t i =
            std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
        const double keep = p[i];
        p[i] = keep + h;
        const double up = loss_of(model, input, scenes[0].gt, tgt);
        p[i] = keep - h;
        const double down = loss_of(model, input, scenes[0].gt, tgt);
        p[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        const double an = (*gs[a])[i];
        const double scale = std::max({1e-8, std::abs(fd), std::abs(an)});
        EXPECT_LT(std::abs(fd - an) / scale, 1e-3)
            << "array " << a << " index " << i << " fd " << fd << " analytic " << an;
        ++checked;
    }
}

}  // namespace

TEST(Gradients, MatchFiniteDifferencesWithDepthHead) {
    toy::TrainConfig cfg;
    cfg.input_mode = toy::InputMode::sp;
    cfg.loss_mode = toy::LossMode::mse;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 3;
    cfg.seed = 11;
    check_param_gradients(cfg, 21);
}

TEST(Gradients, MatchFiniteDifferencesWithLogitHead) {
    toy::TrainConfig cfg;
    cfg.input_mode = toy::InputMode::dc;
    cfg.loss_mode = toy::LossMode::ce;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 3;
    cfg.seed = 13;
    check_param_gradients(cfg, 22);
}

TEST(Gradients, ZeroUpstreamGradientGivesZeroParameterGradients) {
    toy::TrainConfig cfg;
    cfg.hidden = 3;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    toy::ToyModel model = toy::make_model(cfg);
    std::mt19937 rng(5);
    const Tensor3 x = random_tensor(toy::input_channels(cfg), 5, 5, rng);
    const toy::ForwardTrace trace = toy::forward_trace(model, x);
    const Tensor3 dy(trace.y.channels(), 5, 5, 0.0);
    toy::ModelGrads g = toy::backward(model, trace, dy);
    for (auto* arr : toy::detail::grad_arrays(g))
        for (double v : *arr) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Gradients, LogitGradientSumsToZeroPerSupervisedPixel) {
    const BinGrid grid(0.0, 10.0, 10);
    DepthImage gt(4, 4);
    gt.set(0, 0, 2.5);
    gt.set(1, 2, 6.0);
    gt.set(3, 3, 8.1);
    const dc::DCImage target = dc::encode_image(gt, grid, true);

    std::mt19937 rng(6);
    const Tensor3 y = random_tensor(grid.n_bins(), 4, 4, rng);
    Tensor3 dy;
    toy::ce_loss_grad(y, target, dy);

    const std::size_t hw = 16;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * 4 + c;
            double s = 0.0, mag = 0.0;
            for (int j = 0; j < grid.n_bins(); ++j) {
                s += dy.data()[j * hw + idx];
                mag += std::abs(dy.data()[j * hw + idx]);
            }
            if (gt.present(r, c)) {
                EXPECT_NEAR(s, 0.0, 1e-12);  // softmax mass matches target mass
                EXPECT_GT(mag, 0.0);
            } else {
                EXPECT_DOUBLE_EQ(mag, 0.0);  // unsupervised pixels push nothing
            }
        }
}

TEST(Losses, DepthHeadLossIsMeanSquaredErrorOverPresentPixels) {
    DepthImage gt(2, 2);
    gt.set(0, 0, 2.0);
    gt.set(1, 1, 4.0);
    Tensor3 y(1, 2, 2, 0.0);
    y.at(0, 0, 0) = 3.0;  // error 1
    y.at(0, 1, 1) = 1.0;  // error -3
    Tensor3 dy;
    EXPECT_DOUBLE_EQ(toy::mse_loss_grad(y, gt, dy), (1.0 + 9.0) / 2.0);
    EXPECT_DOUBLE_EQ(dy.at(0, 0, 0), 2.0 * 1.0 / 2.0);
    EXPECT_DOUBLE_EQ(dy.at(0, 1, 1), 2.0 * -3.0 / 2.0);
    EXPECT_DOUBLE_EQ(dy.at(0, 0, 1), 0.0);

    // doubling every error quadruples the loss
    y.at(0, 0, 0) = 4.0;
    y.at(0, 1, 1) = -2.0;
    EXPECT_DOUBLE_EQ(toy::mse_loss_grad(y, gt, dy), 4.0 * (1.0 + 9.0) / 2.0);

    const DepthImage empty(2, 2);
    expect_kind(ErrorKind::empty_mask, [&] { toy::mse_loss_grad(y, empty, dy); });
}

TEST(Training, RepeatedRunsAreBitwiseIdentical) {
    toy::TrainConfig cfg;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 3;
    cfg.epochs = 4;
    cfg.batch_size = 2;
    cfg.seed = 42;
    const auto scenes = tiny_dataset(3, 8, 8, 7);
    const toy::TrainResult a = toy::train(cfg, scenes);
    const toy::TrainResult b = toy::train(cfg, scenes);
    EXPECT_TRUE(same_params(a.model, b.model));
    EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(Training, ThreadedBatchesMatchSerialBitwise) {
    toy::TrainConfig cfg;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 3;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 9;
    const auto scenes = tiny_dataset(4, 8, 8, 8);
    const toy::TrainResult serial = toy::train(cfg, scenes);
    cfg.threads = 3;
    const toy::TrainResult threaded = toy::train(cfg, scenes);
    EXPECT_TRUE(same_params(serial.model, threaded.model));
    EXPECT_EQ(serial.epoch_loss, threaded.epoch_loss);
}

TEST(Training, FullBatchDescentWithSmallStepNeverIncreasesTheLoss) {
    toy::TrainConfig cfg;
    cfg.input_mode = toy::InputMode::sp;
    cfg.loss_mode = toy::LossMode::mse;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 3;
    cfg.optimizer = toy::OptimizerKind::sgd;
    cfg.lr = 1e-4;
    cfg.epochs = 12;
    cfg.batch_size = 64;  // larger than the dataset: plain full-batch descent
    cfg.seed = 4;
    const auto scenes = tiny_dataset(3, 8, 8, 10);
    const toy::TrainResult res = toy::train(cfg, scenes);
    ASSERT_EQ(res.epoch_loss.size(), 12u);
    for (std::size_t e = 1; e < res.epoch_loss.size(); ++e)
        EXPECT_LE(res.epoch_loss[e], res.epoch_loss[e - 1] + 1e-10) << "epoch " << e;
    EXPECT_LT(res.epoch_loss.back(), res.epoch_loss.front());
}

TEST(Training, ConstantSceneDrivesCrossEntropyDownToTheTargetEntropy) {
    // one pixel at a bin center: the encoded target is (0.25, 0.5, 0.25) and
    // no network output can push the loss below its entropy
    dc::scene::SceneSpec spec;
    spec.height = 1;
    spec.width = 1;
    spec.background = dc::scene::PlanarField{4.5, 0.0, 0.0};
    spec.noise_sigma = 0.0;

    toy::SceneData data;
    data.gt = dc::scene::render(spec);
    data.sparse = data.gt;
    data.guide = dc::scene::render_guide(spec);

    toy::TrainConfig cfg;
    cfg.input_mode = toy::InputMode::dc;
    cfg.loss_mode = toy::LossMode::ce;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 4;
    cfg.optimizer = toy::OptimizerKind::adam;
    cfg.lr = 0.3;
    cfg.lr_halve_every = 60;
    cfg.epochs = 360;
    cfg.batch_size = 1;
    cfg.seed = 12;

    const toy::TrainResult res = toy::train(cfg, {data});
    const double entropy = 1.5 * std::numbers::ln2;  // -(0.25 ln 0.25)*2 - 0.5 ln 0.5
    EXPECT_GT(res.epoch_loss.back(), entropy - 1e-9);
    EXPECT_NEAR(res.epoch_loss.back(), entropy, 1e-3);

    const DepthImage pred = toy::predict_depth(res.model, data);
    EXPECT_NEAR(pred.at(0, 0), 4.5, 1e-2);
}

TEST(Training, AmbiguousTargetsSettleOnTheirAverageButDecodeToOneSurface) {
    // plain gradient descent on a single logit vector against two
    // disjoint-support targets: the probabilities converge to the average,
    // and the mode-seeking decode picks one real depth instead of the middle
    const BinGrid grid(0.0, 10.0, 10);
    const DCVector t1 = dc::encode_pixel(2.5, grid);
    const DCVector t2 = dc::encode_pixel(6.5, grid);

    std::vector<double> z(grid.n_bins(), 0.0), p(grid.n_bins());
    for (int it = 0; it < 4000; ++it) {
        dc::loss::softmax_into(z, p);
        for (int j = 0; j < grid.n_bins(); ++j)
            z[j] -= 1.0 * (p[j] - 0.5 * (t1.coeffs()[j] + t2.coeffs()[j]));
    }
    dc::loss::softmax_into(z, p);

    for (int j = 0; j < grid.n_bins(); ++j)
        EXPECT_NEAR(p[j], 0.5 * (t1.coeffs()[j] + t2.coeffs()[j]), 1e-3) << "bin " << j;

    EXPECT_NEAR(dc::decode_3coeff(p, grid), 2.5, 1e-3);  // sticks to a surface
    EXPECT_NEAR(dc::decode_all(p, grid), 4.5, 1e-3);     // the mean invents a depth
}

TEST(Model, InputAndOutputChannelCountsFollowTheConfiguration) {
    toy::TrainConfig cfg;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.input_mode = toy::InputMode::sp;
    cfg.loss_mode = toy::LossMode::mse;
    EXPECT_EQ(toy::input_channels(cfg), 3);  // depth, validity, guide
    EXPECT_EQ(toy::output_channels(cfg), 1);
    cfg.use_guide = false;
    EXPECT_EQ(toy::input_channels(cfg), 2);
    cfg.input_mode = toy::InputMode::dc;
    cfg.loss_mode = toy::LossMode::ce;
    EXPECT_EQ(toy::input_channels(cfg), 10);
    EXPECT_EQ(toy::output_channels(cfg), 10);
}

TEST(Model, BuildInputLaysOutChannelsAsDocumented) {
    const auto scenes = tiny_dataset(1, 6, 6, 31);
    const toy::SceneData& s = scenes[0];

    toy::TrainConfig sp;
    sp.input_mode = toy::InputMode::sp;
    sp.grid = BinGrid(0.0, 10.0, 10);
    const Tensor3 xs = toy::build_input(s, sp);
    ASSERT_EQ(xs.channels(), 3);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            if (s.sparse.present(r, c)) {
                EXPECT_DOUBLE_EQ(xs.at(0, r, c), s.sparse.at(r, c));
                EXPECT_DOUBLE_EQ(xs.at(1, r, c), 1.0);
            } else {
                EXPECT_DOUBLE_EQ(xs.at(0, r, c), 0.0);
                EXPECT_DOUBLE_EQ(xs.at(1, r, c), 0.0);
            }
            EXPECT_DOUBLE_EQ(xs.at(2, r, c), s.guide.at(0, r, c));
        }

    toy::TrainConfig dcc;
    dcc.input_mode = toy::InputMode::dc;
    dcc.grid = BinGrid(0.0, 10.0, 10);
    const Tensor3 xd = toy::build_input(s, dcc);
    ASSERT_EQ(xd.channels(), 11);
    const dc::DCImage enc = dc::encode_image(s.sparse, dcc.grid, true);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            const auto px = enc.pixel(r, c);
            for (int j = 0; j < 10; ++j) EXPECT_DOUBLE_EQ(xd.at(j, r, c), px[j]);
            EXPECT_DOUBLE_EQ(xd.at(10, r, c), s.guide.at(0, r, c));
        }
}

TEST(Model, DepthHeadPredictionsStayInTheRepresentableBand) {
    toy::TrainConfig cfg;
    cfg.input_mode = toy::InputMode::sp;
    cfg.loss_mode = toy::LossMode::mse;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 2;
    toy::ToyModel model = toy::make_model(cfg);
    model.l3.b[0] = 1e4;

    const auto scenes = tiny_dataset(1, 6, 6, 41);
    const DepthImage hi = toy::predict_depth(model, scenes[0]);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) EXPECT_DOUBLE_EQ(hi.at(r, c), cfg.grid.encodable_max());

    model.l3.b[0] = -1e4;
    const DepthImage lo = toy::predict_depth(model, scenes[0]);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) EXPECT_DOUBLE_EQ(lo.at(r, c), cfg.grid.encodable_min());
}

TEST(Model, ParameterFilesRoundTripAndRejectMismatchedShapes) {
    toy::TrainConfig cfg;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 3;
    cfg.seed = 77;
    const toy::ToyModel model = toy::make_model(cfg);
    const fs::path path = test_dir() / "params.bin";
    toy::save_model(path, model);

    const toy::ToyModel back = toy::load_model(path, cfg);
    EXPECT_TRUE(same_params(model, back));

    toy::TrainConfig other = cfg;
    other.hidden = 4;
    expect_kind(ErrorKind::config, [&] { toy::load_model(path, other); });
}

TEST(Model, DatasetGenerationIsSeededAndValidated) {
    dc::scene::SamplePattern pattern;
    pattern.kind = dc::scene::PatternKind::every_kth_row;
    pattern.k = 2;
    const auto a = toy::make_scene_dataset(2, 8, 8, 1, 0.5, 9.5, 0.01, pattern, 5);
    const auto b = toy::make_scene_dataset(2, 8, 8, 1, 0.5, 9.5, 0.01, pattern, 5);
    const auto c = toy::make_scene_dataset(2, 8, 8, 1, 0.5, 9.5, 0.01, pattern, 6);
    ASSERT_EQ(a.size(), 2u);
    bool any_diff = false;
    for (int i = 0; i < 2; ++i)
        for (int r = 0; r < 8; ++r)
            for (int cc = 0; cc < 8; ++cc) {
                EXPECT_DOUBLE_EQ(a[i].gt.at(r, cc), b[i].gt.at(r, cc));
                EXPECT_EQ(a[i].sparse.present(r, cc), b[i].sparse.present(r, cc));
                if (a[i].gt.at(r, cc) != c[i].gt.at(r, cc)) any_diff = true;
            }
    EXPECT_TRUE(any_diff);
    expect_kind(ErrorKind::invalid_input,
                [&] { toy::make_scene_dataset(0, 8, 8, 1, 0.5, 9.5, 0.0, pattern, 5); });
}

TEST(Training, RunawayStepSizeReportsDivergence) {
    toy::TrainConfig cfg;
    cfg.input_mode = toy::InputMode::sp;
    cfg.loss_mode = toy::LossMode::mse;
    cfg.grid = BinGrid(0.0, 10.0, 10);
    cfg.hidden = 3;
    cfg.optimizer = toy::OptimizerKind::sgd;
    cfg.lr = 1e6;
    cfg.epochs = 60;  // even a bias-only collapse overflows well within this
    cfg.seed = 3;
    const auto scenes = tiny_dataset(2, 8, 8, 12);
    expect_kind(ErrorKind::training_diverged, [&] { toy::train(cfg, scenes); });
}

TEST(Training, ConfigurationIsValidated) {
    const auto scenes = tiny_dataset(1, 6, 6, 13);
    toy::TrainConfig cfg;
    cfg.lr = 0.0;
    expect_kind(ErrorKind::config, [&] { toy::train(cfg, scenes); });
    cfg = {};
    cfg.epochs = 0;
    expect_kind(ErrorKind::config, [&] { toy::train(cfg, scenes); });
    cfg = {};
    cfg.batch_size = 0;
    expect_kind(ErrorKind::config, [&] { toy::train(cfg, scenes); });
    cfg = {};
    cfg.threads = 0;
    expect_kind(ErrorKind::config, [&] { toy::train(cfg, scenes); });
    cfg = {};
    expect_kind(ErrorKind::invalid_input, [&] { toy::train(cfg, {}); });
    EXPECT_EQ(toy::to_string(toy::input_mode_from_string("sp")), "sp");
    EXPECT_EQ(toy::to_string(toy::loss_mode_from_string("ce")), "ce");
    expect_kind(ErrorKind::config, [&] { toy::input_mode_from_string("nope"); });
    expect_kind(ErrorKind::config, [&] { toy::loss_mode_from_string("nope"); });
}
