#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dc/analysis.hpp"
#include "dc/bin_grid.hpp"
#include "dc/codec.hpp"
#include "dc/dc_image.hpp"
#include "dc/depth_image.hpp"
#include "dc/error.hpp"
#include "dc/loss.hpp"
#include "dc/metrics.hpp"
#include "dc/scene.hpp"
#include "dc/tensor.hpp"
#include "dc/tensor_io.hpp"

namespace dc::toy {

enum class InputMode { sp, dc };   // sparse depth + validity, or depth coefficients
enum class LossMode { mse, ce };   // depth head with MSE, or logit head with cross entropy
enum class OptimizerKind { sgd, adam };

inline std::string to_string(InputMode m) { return m == InputMode::sp ? "sp" : "dc"; }
inline std::string to_string(LossMode m) { return m == LossMode::mse ? "mse" : "ce"; }

inline InputMode input_mode_from_string(const std::string& s) {
    if (s == "sp") return InputMode::sp;
    if (s == "dc") return InputMode::dc;
    fail(ErrorKind::config, "unknown input mode '" + s + "' (expected sp or dc)");
}

inline LossMode loss_mode_from_string(const std::string& s) {
    if (s == "mse") return LossMode::mse;
    if (s == "ce") return LossMode::ce;
    fail(ErrorKind::config, "unknown loss mode '" + s + "' (expected mse or ce)");
}

struct TrainConfig {
    InputMode input_mode = InputMode::dc;
    LossMode loss_mode = LossMode::ce;
    BinGrid grid = BinGrid(0.0, 10.0, 20);
    double lr = 1e-3;
    int epochs = 200;
    int batch_size = 8;
    std::uint32_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int lr_halve_every = 0;  // 0 keeps the learning rate constant
    bool use_guide = true;
    int hidden = 16;
    int threads = 1;
};

inline void validate(const TrainConfig& cfg) {
    if (!std::isfinite(cfg.lr) || cfg.lr <= 0.0) fail(ErrorKind::config, "learning rate must be positive");
    if (cfg.epochs < 1) fail(ErrorKind::config, "epoch count must be at least 1");
    if (cfg.batch_size < 1) fail(ErrorKind::config, "batch size must be at least 1");
    if (cfg.hidden < 1) fail(ErrorKind::config, "hidden width must be at least 1");
    if (cfg.threads < 1) fail(ErrorKind::config, "thread count must be at least 1");
    if (cfg.lr_halve_every < 0) fail(ErrorKind::config, "lr halving interval must be non-negative");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        fail(ErrorKind::config, "adam betas must lie in [0, 1)");
    if (!std::isfinite(cfg.adam_eps) || cfg.adam_eps <= 0.0)
        fail(ErrorKind::config, "adam epsilon must be positive");
}

inline int input_channels(const TrainConfig& cfg) {
    const int base = cfg.input_mode == InputMode::sp ? 2 : cfg.grid.n_bins();
    return base + (cfg.use_guide ? 1 : 0);
}

inline int output_channels(const TrainConfig& cfg) {
    return cfg.loss_mode == LossMode::mse ? 1 : cfg.grid.n_bins();
}

// ---- convolution layer ------------------------------------------------------

// 3x3 kernels, stride 1, zero ("same") padding. Weights are stored
// [out][in][ky][kx], kernels row-major.
struct ConvLayer {
    int in_ch = 0;
    int out_ch = 0;
    std::vector<double> w;  // in_ch * out_ch * 9
    std::vector<double> b;  // out_ch

    ConvLayer() = default;
    ConvLayer(int in, int out)
        : in_ch(in), out_ch(out), w(static_cast<std::size_t>(in) * out * 9, 0.0), b(out, 0.0) {}

    double& wat(int o, int i, int ky, int kx) {
        return w[(static_cast<std::size_t>(o) * in_ch + i) * 9 + ky * 3 + kx];
    }
    double wat(int o, int i, int ky, int kx) const {
        return w[(static_cast<std::size_t>(o) * in_ch + i) * 9 + ky * 3 + kx];
    }
};

namespace detail {

inline Tensor3 pad1(const Tensor3& in) {
    Tensor3 out(in.channels(), in.height() + 2, in.width() + 2, 0.0);
    const int W = in.width();
    for (int c = 0; c < in.channels(); ++c)
        for (int y = 0; y < in.height(); ++y) {
            const double* src = in.channel(c) + static_cast<std::size_t>(y) * W;
            double* dst = out.channel(c) + static_cast<std::size_t>(y + 1) * (W + 2) + 1;
            std::copy(src, src + W, dst);
        }
    return out;
}

// out(o, y, x) = b_o + sum_i sum_{ky,kx} w(o,i,ky,kx) * padded(i, y+ky, x+kx)
inline void conv_forward_into(const ConvLayer& L, const Tensor3& padded, Tensor3& out) {
    const int H = out.height(), W = out.width(), PW = W + 2;
    for (int o = 0; o < L.out_ch; ++o) {
        double* op = out.channel(o);
        std::fill(op, op + static_cast<std::size_t>(H) * W, L.b[o]);
        for (int i = 0; i < L.in_ch; ++i) {
            const double* ip = padded.channel(i);
            const double* w = L.w.data() + (static_cast<std::size_t>(o) * L.in_ch + i) * 9;
            for (int y = 0; y < H; ++y) {
                const double* r0 = ip + static_cast<std::size_t>(y) * PW;
                const double* r1 = r0 + PW;
                const double* r2 = r1 + PW;
                double* orow = op + static_cast<std::size_t>(y) * W;
                for (int x = 0; x < W; ++x)
                    orow[x] += w[0] * r0[x] + w[1] * r0[x + 1] + w[2] * r0[x + 2] +
                               w[3] * r1[x] + w[4] * r1[x + 1] + w[5] * r1[x + 2] +
                               w[6] * r2[x] + w[7] * r2[x + 1] + w[8] * r2[x + 2];
            }
        }
    }
}

inline Tensor3 conv_forward(const ConvLayer& L, const Tensor3& in) {
    if (in.channels() != L.in_ch)
        fail(ErrorKind::config, "layer expects " + std::to_string(L.in_ch) + " channels, got " +
                                    std::to_string(in.channels()));
    Tensor3 out(L.out_ch, in.height(), in.width());
    conv_forward_into(L, pad1(in), out);
    return out;
}

// Gradient wrt the layer input equals a forward pass over the upstream
// gradient with in/out swapped and each kernel rotated 180 degrees.
inline ConvLayer input_grad_kernel(const ConvLayer& L) {
    ConvLayer T(L.out_ch, L.in_ch);
    for (int o = 0; o < L.out_ch; ++o)
        for (int i = 0; i < L.in_ch; ++i)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) T.wat(i, o, ky, kx) = L.wat(o, i, 2 - ky, 2 - kx);
    return T;
}

// dW(o,i,ky,kx) = sum_{y,x} dout(o,y,x) * padded_in(i, y+ky, x+kx); db = sum dout.
inline void conv_param_grads(const ConvLayer& L, const Tensor3& padded_in, const Tensor3& dout,
                             std::vector<double>& dw, std::vector<double>& db) {
    const int H = dout.height(), W = dout.width(), PW = W + 2;
    for (int o = 0; o < L.out_ch; ++o) {
        const double* gp = dout.channel(o);
        double bs = 0.0;
        for (std::size_t k = 0; k < static_cast<std::size_t>(H) * W; ++k) bs += gp[k];
        db[o] += bs;
        for (int i = 0; i < L.in_ch; ++i) {
            const double* ip = padded_in.channel(i);
            double* dwk = dw.data() + (static_cast<std::size_t>(o) * L.in_ch + i) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double s = 0.0;
                    for (int y = 0; y < H; ++y) {
                        const double* gr = gp + static_cast<std::size_t>(y) * W;
                        const double* ir = ip + static_cast<std::size_t>(y + ky) * PW + kx;
                        for (int x = 0; x < W; ++x) s += gr[x] * ir[x];
                    }
                    dwk[ky * 3 + kx] += s;
                }
        }
    }
}

}  // namespace detail

// ---- model ------------------------------------------------------------------

struct ToyModel {
    TrainConfig config;
    ConvLayer l1, l2, l3;
};

inline ToyModel make_model(const TrainConfig& cfg, std::mt19937& rng) {
    validate(cfg);
    ToyModel m;
    m.config = cfg;
    m.l1 = ConvLayer(input_channels(cfg), cfg.hidden);
    m.l2 = ConvLayer(cfg.hidden, cfg.hidden);
    m.l3 = ConvLayer(cfg.hidden, output_channels(cfg));
    for (ConvLayer* L : {&m.l1, &m.l2, &m.l3}) {
        const double s = std::sqrt(1.0 / (L->in_ch * 9.0));
        std::uniform_real_distribution<double> u(-s, s);
        for (double& w : L->w) w = u(rng);
    }
    return m;
}

inline ToyModel make_model(const TrainConfig& cfg) {
    std::mt19937 rng(cfg.seed);
    return make_model(cfg, rng);
}

struct ForwardTrace {
    Tensor3 x;   // network input
    Tensor3 z1;  // conv1 pre-activation
    Tensor3 a1;
    Tensor3 z2;  // conv2 pre-activation
    Tensor3 a2;
    Tensor3 y;   // conv3 output: depth map or per-bin logits
};

inline Tensor3 relu(const Tensor3& z) {
    Tensor3 a = z;
    for (double& v : a.data()) v = std::max(0.0, v);
    return a;
}

inline ForwardTrace forward_trace(const ToyModel& m, const Tensor3& x) {
    ForwardTrace t;
    t.x = x;
    t.z1 = detail::conv_forward(m.l1, x);
    t.a1 = relu(t.z1);
    t.z2 = detail::conv_forward(m.l2, t.a1);
    t.a2 = relu(t.z2);
    t.y = detail::conv_forward(m.l3, t.a2);
    return t;
}

inline Tensor3 forward(const ToyModel& m, const Tensor3& x) { return forward_trace(m, x).y; }

struct ModelGrads {
    std::vector<double> w1, b1, w2, b2, w3, b3;

    explicit ModelGrads(const ToyModel& m)
        : w1(m.l1.w.size(), 0.0), b1(m.l1.b.size(), 0.0), w2(m.l2.w.size(), 0.0),
          b2(m.l2.b.size(), 0.0), w3(m.l3.w.size(), 0.0), b3(m.l3.b.size(), 0.0) {}

    void add_scaled(const ModelGrads& o, double s) {
        auto axpy = [s](std::vector<double>& dst, const std::vector<double>& src) {
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
        };
        axpy(w1, o.w1);
        axpy(b1, o.b1);
        axpy(w2, o.w2);
        axpy(b2, o.b2);
        axpy(w3, o.w3);
        axpy(b3, o.b3);
    }
};

// Exact gradients of the traced forward pass given dL/dy. The input gradient
// of the first layer is never needed, so it is not computed.
inline ModelGrads backward(const ToyModel& m, const ForwardTrace& t, const Tensor3& dy) {
    if (!dy.same_shape(t.y)) fail(ErrorKind::config, "upstream gradient shape mismatch");
    ModelGrads g(m);

    const Tensor3 pad_a2 = detail::pad1(t.a2);
    detail::conv_param_grads(m.l3, pad_a2, dy, g.w3, g.b3);
    Tensor3 da2(m.l2.out_ch, dy.height(), dy.width());
    detail::conv_forward_into(detail::input_grad_kernel(m.l3), detail::pad1(dy), da2);
    for (std::size_t i = 0; i < da2.data().size(); ++i)
        if (t.z2.data()[i] <= 0.0) da2.data()[i] = 0.0;

    const Tensor3 pad_a1 = detail::pad1(t.a1);
    detail::conv_param_grads(m.l2, pad_a1, da2, g.w2, g.b2);
    Tensor3 da1(m.l1.out_ch, dy.height(), dy.width());
    detail::conv_forward_into(detail::input_grad_kernel(m.l2), detail::pad1(da2), da1);
    for (std::size_t i = 0; i < da1.data().size(); ++i)
        if (t.z1.data()[i] <= 0.0) da1.data()[i] = 0.0;

    detail::conv_param_grads(m.l1, detail::pad1(t.x), da1, g.w1, g.b1);
    return g;
}

// ---- losses -----------------------------------------------------------------

// Mean squared error over pixels with ground truth; dy receives dL/dy.
inline double mse_loss_grad(const Tensor3& y, const DepthImage& gt, Tensor3& dy) {
    if (y.channels() != 1 || y.height() != gt.height() || y.width() != gt.width())
        fail(ErrorKind::config, "depth head output must be 1 x H x W matching ground truth");
    dy = Tensor3(1, y.height(), y.width(), 0.0);
    std::size_t m = gt.present_count();
    if (m == 0) fail(ErrorKind::empty_mask, "no ground-truth pixels to train on");
    double loss = 0.0;
    for (int r = 0; r < gt.height(); ++r)
        for (int c = 0; c < gt.width(); ++c) {
            if (!gt.present(r, c)) continue;
            const double e = y.at(0, r, c) - gt.at(r, c);
            loss += e * e;
            dy.at(0, r, c) = 2.0 * e / static_cast<double>(m);
        }
    return loss / static_cast<double>(m);
}

// Cross entropy between softmaxed logits and encoded ground truth, averaged
// over pixels with ground truth; dy receives dL/dlogits.
inline double ce_loss_grad(const Tensor3& y, const DCImage& gt_dc, Tensor3& dy) {
    const int bins = gt_dc.grid().n_bins();
    if (y.channels() != bins || y.height() != gt_dc.height() || y.width() != gt_dc.width())
        fail(ErrorKind::config, "logit head output must be N x H x W matching ground truth");
    dy = Tensor3(bins, y.height(), y.width(), 0.0);
    const std::size_t hw = static_cast<std::size_t>(y.height()) * y.width();

    std::size_t m = 0;
    for (int r = 0; r < y.height(); ++r)
        for (int c = 0; c < y.width(); ++c)
            if (!gt_dc.pixel_missing(r, c)) ++m;
    if (m == 0) fail(ErrorKind::empty_mask, "no ground-truth pixels to train on");

    std::vector<double> z(bins), p(bins);
    double loss = 0.0;
    for (int r = 0; r < y.height(); ++r)
        for (int c = 0; c < y.width(); ++c) {
            if (gt_dc.pixel_missing(r, c)) continue;
            const std::size_t idx = static_cast<std::size_t>(r) * y.width() + c;
            for (int j = 0; j < bins; ++j) z[j] = y.data()[j * hw + idx];
            loss::softmax_into(z, p);
            const auto gt = gt_dc.pixel(r, c);
            for (int j = 0; j < bins; ++j) {
                if (gt[j] != 0.0) loss -= gt[j] * std::log(std::max(p[j], loss::kProbFloor));
                dy.data()[j * hw + idx] = (p[j] - gt[j]) / static_cast<double>(m);
            }
        }
    return loss / static_cast<double>(m);
}

// ---- data -------------------------------------------------------------------

struct SceneData {
    DepthImage gt;
    DepthImage sparse;
    Tensor3 guide;  // 1 x H x W grayscale
};

inline std::vector<SceneData> make_scene_dataset(int count, int height, int width, int n_objects,
                                                 double range_min, double range_max,
                                                 double noise_sigma,
                                                 const scene::SamplePattern& pattern,
                                                 std::uint32_t seed, int guide_blur = 1) {
    if (count < 1) fail(ErrorKind::invalid_input, "dataset needs at least one scene");
    std::mt19937 rng(seed);
    std::vector<SceneData> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const scene::SceneSpec spec = scene::random_scene(rng, height, width, n_objects, range_min,
                                                          range_max, noise_sigma, guide_blur);
        scene::SamplePattern pat = pattern;
        pat.seed = static_cast<std::uint32_t>(rng());
        DepthImage gt = scene::render(spec);
        DepthImage sparse = scene::sample(gt, pat);
        Tensor3 guide = scene::render_guide(spec);
        out.push_back(SceneData{std::move(gt), std::move(sparse), std::move(guide)});
    }
    return out;
}

inline Tensor3 build_input(const SceneData& data, const TrainConfig& cfg) {
    const int H = data.gt.height(), W = data.gt.width();
    if (data.sparse.height() != H || data.sparse.width() != W || data.guide.height() != H ||
        data.guide.width() != W)
        fail(ErrorKind::invalid_input, "scene layers must share dimensions");
    Tensor3 x(input_channels(cfg), H, W, 0.0);
    if (cfg.input_mode == InputMode::sp) {
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c)
                if (data.sparse.present(r, c)) {
                    x.at(0, r, c) = data.sparse.at(r, c);
                    x.at(1, r, c) = 1.0;
                }
    } else {
        const DCImage enc = encode_image(data.sparse, cfg.grid, /*clamp=*/true);
        const int bins = cfg.grid.n_bins();
        const std::size_t hw = static_cast<std::size_t>(H) * W;
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const auto px = enc.pixel(r, c);
                const std::size_t idx = static_cast<std::size_t>(r) * W + c;
                for (int j = 0; j < bins; ++j) x.data()[j * hw + idx] = px[j];
            }
    }
    if (cfg.use_guide) {
        double* gch = x.channel(x.channels() - 1);
        const double* src = data.guide.channel(0);
        std::copy(src, src + static_cast<std::size_t>(H) * W, gch);
    }
    return x;
}

// ---- training ---------------------------------------------------------------

struct TrainResult {
    ToyModel model;
    std::vector<double> epoch_loss;  // mean per-scene loss, one entry per epoch
};

namespace detail {

struct AdamState {
    ModelGrads m, v;
    long long step = 0;
    explicit AdamState(const ToyModel& model) : m(model), v(model) {}
};

inline std::array<std::vector<double>*, 6> param_arrays(ToyModel& m) {
    return {&m.l1.w, &m.l1.b, &m.l2.w, &m.l2.b, &m.l3.w, &m.l3.b};
}

inline std::array<const std::vector<double>*, 6> param_arrays(const ToyModel& m) {
    return {&m.l1.w, &m.l1.b, &m.l2.w, &m.l2.b, &m.l3.w, &m.l3.b};
}

inline std::array<std::vector<double>*, 6> grad_arrays(ModelGrads& g) {
    return {&g.w1, &g.b1, &g.w2, &g.b2, &g.w3, &g.b3};
}

inline void apply_update(ToyModel& model, ModelGrads& grads, AdamState* adam, double lr,
                         const TrainConfig& cfg) {
    auto params = param_arrays(model);
    auto gs = grad_arrays(grads);
    if (!adam) {
        for (int a = 0; a < 6; ++a) {
            std::vector<double>& p = *params[a];
            const std::vector<double>& g = *gs[a];
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
        }
        return;
    }
    adam->step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam->step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam->step));
    auto ms = grad_arrays(adam->m);
    auto vs = grad_arrays(adam->v);
    for (int a = 0; a < 6; ++a) {
        std::vector<double>& p = *params[a];
        const std::vector<double>& g = *gs[a];
        std::vector<double>& m = *ms[a];
        std::vector<double>& v = *vs[a];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
        }
    }
}

}  // namespace detail

// Gradient and loss for one scene with the inputs and targets prebuilt.
inline double scene_loss_grads(const ToyModel& model, const Tensor3& input, const DepthImage& gt,
                               const DCImage* gt_dc, ModelGrads& out) {
    const ForwardTrace trace = forward_trace(model, input);
    Tensor3 dy;
    double loss;
    if (model.config.loss_mode == LossMode::mse)
        loss = mse_loss_grad(trace.y, gt, dy);
    else
        loss = ce_loss_grad(trace.y, *gt_dc, dy);
    out = backward(model, trace, dy);
    return loss;
}

inline TrainResult train(const TrainConfig& cfg, const std::vector<SceneData>& scenes) {
    validate(cfg);
    if (scenes.empty()) fail(ErrorKind::invalid_input, "training needs at least one scene");

    // precompute network inputs and targets once
    std::vector<Tensor3> inputs;
    std::vector<DCImage> targets_dc;
    inputs.reserve(scenes.size());
    for (const SceneData& s : scenes) {
        inputs.push_back(build_input(s, cfg));
        if (cfg.loss_mode == LossMode::ce) targets_dc.push_back(encode_image(s.gt, cfg.grid, true));
    }

    std::mt19937 rng(cfg.seed);
    ToyModel model = make_model(cfg, rng);
    detail::AdamState adam(model);
    detail::AdamState* adam_ptr = cfg.optimizer == OptimizerKind::adam ? &adam : nullptr;

    const int n = static_cast<int>(scenes.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    TrainResult result{std::move(model), {}};
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = cfg.lr_halve_every > 0
                              ? cfg.lr * std::pow(0.5, epoch / cfg.lr_halve_every)
                              : cfg.lr;
        double loss_sum = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            std::vector<ModelGrads> scene_grads(bsz, ModelGrads(result.model));
            std::vector<double> scene_loss(bsz, 0.0);

            auto work = [&](int lo, int hi) {
                for (int k = lo; k < hi; ++k) {
                    const int si = order[start + k];
                    const DCImage* tgt = cfg.loss_mode == LossMode::ce ? &targets_dc[si] : nullptr;
                    scene_loss[k] = scene_loss_grads(result.model, inputs[si], scenes[si].gt, tgt,
                                                     scene_grads[k]);
                }
            };
            if (cfg.threads <= 1 || bsz == 1) {
                work(0, bsz);
            } else {
                const int nt = std::min(cfg.threads, bsz);
                std::vector<std::thread> pool;
                for (int t = 0; t < nt; ++t) {
                    const int lo = bsz * t / nt, hi = bsz * (t + 1) / nt;
                    pool.emplace_back(work, lo, hi);
                }
                for (auto& th : pool) th.join();
            }

            // fixed-order reduction: identical result serial or threaded
            ModelGrads acc(result.model);
            for (int k = 0; k < bsz; ++k) {
                acc.add_scaled(scene_grads[k], 1.0 / bsz);
                loss_sum += scene_loss[k];
            }
            detail::apply_update(result.model, acc, adam_ptr, lr, cfg);
        }
        const double epoch_loss = loss_sum / n;
        if (!std::isfinite(epoch_loss))
            fail(ErrorKind::training_diverged, "training diverged at epoch " + std::to_string(epoch));
        result.epoch_loss.push_back(epoch_loss);
    }
    return result;
}

// ---- inference --------------------------------------------------------------

inline DepthImage predict_depth(const ToyModel& model, const SceneData& data) {
    const Tensor3 y = forward(model, build_input(data, model.config));
    const int H = y.height(), W = y.width();
    DepthImage out(H, W);
    if (model.config.loss_mode == LossMode::mse) {
        // the depth head is unconstrained; clip into the representable band
        const double lo = model.config.grid.encodable_min();
        const double hi = model.config.grid.encodable_max();
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) out.set(r, c, std::clamp(y.at(0, r, c), lo, hi));
        return out;
    }
    const int bins = model.config.grid.n_bins();
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    std::vector<double> z(bins), p(bins);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * W + c;
            for (int j = 0; j < bins; ++j) z[j] = y.data()[j * hw + idx];
            loss::softmax_into(z, p);
            out.set(r, c, decode_3coeff(p, model.config.grid));
        }
    return out;
}

// ---- parameter files --------------------------------------------------------

inline void save_model(const std::filesystem::path& path, const ToyModel& model) {
    std::vector<double> flat;
    for (const std::vector<double>* arr : detail::param_arrays(model))
        flat.insert(flat.end(), arr->begin(), arr->end());
    const std::uint32_t dims[1] = {static_cast<std::uint32_t>(flat.size())};
    io::save_tensor(path, dims, flat);
}

inline ToyModel load_model(const std::filesystem::path& path, const TrainConfig& cfg) {
    validate(cfg);
    ToyModel model;
    model.config = cfg;
    model.l1 = ConvLayer(input_channels(cfg), cfg.hidden);
    model.l2 = ConvLayer(cfg.hidden, cfg.hidden);
    model.l3 = ConvLayer(cfg.hidden, output_channels(cfg));
    const io::LoadedTensor t = io::load_tensor(path);
    std::size_t expected = 0;
    for (const std::vector<double>* arr : detail::param_arrays(model)) expected += arr->size();
    if (t.dims.size() != 1 || t.data.size() != expected)
        fail(ErrorKind::config, "'" + path.string() + "' does not match the model configuration");
    std::size_t off = 0;
    for (std::vector<double>* arr : detail::param_arrays(model)) {
        std::copy(t.data.begin() + off, t.data.begin() + off + arr->size(), arr->begin());
        off += arr->size();
    }
    return model;
}

// ---- four-way comparison ----------------------------------------------------

struct EvalSummary {
    metrics::MetricReport report;
    analysis::MixedPixelStats mixed;
};

// Pools every held-out pixel into one tall mosaic so the report reduces over
// the whole set at once; mixed-pixel windows never cross scene boundaries.
inline EvalSummary score_on_scenes(const ToyModel& model, const std::vector<SceneData>& scenes,
                                   double t, int mixed_radius = 2) {
    if (scenes.empty()) fail(ErrorKind::invalid_input, "scoring needs at least one scene");
    int total_h = 0;
    const int W = scenes.front().gt.width();
    for (const SceneData& s : scenes) {
        if (s.gt.width() != W) fail(ErrorKind::invalid_input, "scored scenes must share width");
        total_h += s.gt.height();
    }
    DepthImage pred_all(total_h, W), gt_all(total_h, W);
    EvalSummary out;
    int row0 = 0;
    for (const SceneData& s : scenes) {
        const DepthImage pred = predict_depth(model, s);
        const auto st = analysis::mixed_pixel_stats(pred, s.gt, t, mixed_radius);
        out.mixed.mixed += st.mixed;
        out.mixed.total += st.total;
        for (int r = 0; r < s.gt.height(); ++r)
            for (int c = 0; c < W; ++c) {
                if (pred.present(r, c)) pred_all.set(row0 + r, c, pred.at(r, c));
                if (s.gt.present(r, c)) gt_all.set(row0 + r, c, s.gt.at(r, c));
            }
        row0 += s.gt.height();
    }
    out.report = metrics::evaluate(pred_all, gt_all, t);
    return out;
}

struct AblationRow {
    InputMode input_mode;
    LossMode loss_mode;
    metrics::MetricReport report;
    analysis::MixedPixelStats mixed;
    double final_train_loss = 0.0;

    double mixed_rate() const { return mixed.rate(); }
};

// Trains the four input/loss combinations with identical data and seed, then
// scores each on held-out scenes.
inline std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                             const std::vector<SceneData>& train_scenes,
                                             const std::vector<SceneData>& eval_scenes, double t,
                                             int mixed_radius = 2) {
    if (eval_scenes.empty()) fail(ErrorKind::invalid_input, "ablation needs held-out scenes");
    constexpr std::array<std::pair<InputMode, LossMode>, 4> combos = {
        {{InputMode::sp, LossMode::mse},
         {InputMode::dc, LossMode::mse},
         {InputMode::sp, LossMode::ce},
         {InputMode::dc, LossMode::ce}}};

    std::vector<AblationRow> rows;
    for (const auto& [imode, lmode] : combos) {
        TrainConfig cfg = base;
        cfg.input_mode = imode;
        cfg.loss_mode = lmode;
        TrainResult tr = train(cfg, train_scenes);
        const EvalSummary s = score_on_scenes(tr.model, eval_scenes, t, mixed_radius);
        rows.push_back(AblationRow{imode, lmode, s.report, s.mixed, tr.epoch_loss.back()});
    }
    return rows;
}

// Everything needed to reproduce one four-way comparison run from a seed.
// The defaults are sized for a single desktop core.
struct AblationSpec {
    int train_scenes = 64;
    int eval_scenes = 16;
    int height = 20;
    int width = 20;
    int n_objects = 2;
    double range_min = 0.5;
    double range_max = 9.5;
    double noise_sigma = 0.02;
    scene::PatternKind pattern = scene::PatternKind::uniform_random;
    int pattern_k = 60;  // samples per scene for uniform, stride otherwise
    double t = 1.0;
    int mixed_radius = 2;
    TrainConfig base;  // input/loss fields are overwritten per combination

    AblationSpec() {
        base.lr = 3e-3;
        base.epochs = 80;
        base.batch_size = 8;
        base.hidden = 12;
        base.lr_halve_every = 32;
    }
};

inline std::vector<AblationRow> run_ablation(const AblationSpec& spec, std::uint32_t seed) {
    if (spec.train_scenes < 1) fail(ErrorKind::invalid_input, "need at least one training scene");
    scene::SamplePattern pattern;
    pattern.kind = spec.pattern;
    pattern.k = spec.pattern_k;
    const auto make = [&](int count, std::uint32_t s) {
        return make_scene_dataset(count, spec.height, spec.width, spec.n_objects, spec.range_min,
                                  spec.range_max, spec.noise_sigma, pattern, s);
    };
    TrainConfig base = spec.base;
    base.seed = seed;
    // held-out scenes come from a stream the training seed never touches
    return run_ablation(base, make(spec.train_scenes, seed), make(spec.eval_scenes, seed + 1000003u),
                        spec.t, spec.mixed_radius);
}

inline std::string ablation_csv_header() {
    return "input,loss," + metrics::csv_header() + ",mixed_pixel_rate,final_train_loss";
}

inline std::string ablation_csv_row(const AblationRow& row) {
    std::ostringstream os;
    os << std::setprecision(12);
    os << to_string(row.input_mode) << ',' << to_string(row.loss_mode) << ','
       << metrics::csv_row(row.report) << ',' << row.mixed_rate() << ',' << row.final_train_loss;
    return os.str();
}

}  // namespace dc::toy
