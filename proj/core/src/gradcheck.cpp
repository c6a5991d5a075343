#include "srnet/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "srnet/conv2d.hpp"
#include "srnet/metrics.hpp"
#include "srnet/model.hpp"
#include "srnet/pooling.hpp"
#include "srnet/resblock.hpp"
#include "srnet/rng.hpp"
#include "srnet/trainer.hpp"
#include "srnet/upsample.hpp"

namespace srnet {

namespace {

constexpr double kEps = 1e-5;
constexpr int kInstancesPerKernel = 20;

const ExecOpts kSerial{1};

TensorD randn(const TensorShape& s, RngState& rng, double scale = 1.0) {
    TensorD t(s);
    for (auto& v : t.data) v = scale * rng.normal();
    return t;
}

// max |analytic - fd| normalized by the largest gradient magnitude
double rel_err(const TensorD& analytic, const TensorD& fd) {
    double denom = std::max({max_abs(analytic), max_abs(fd), 1e-12});
    double worst = 0.0;
    for (size_t i = 0; i < analytic.data.size(); ++i) {
        worst = std::max(worst, std::abs(analytic.data[i] - fd.data[i]));
    }
    return worst / denom;
}

// Central differences of scalar_fn with respect to every element of `wrt`.
TensorD fd_grad(TensorD& wrt, const std::function<double()>& scalar_fn) {
    TensorD g(wrt.shape);
    for (size_t i = 0; i < wrt.data.size(); ++i) {
        const double keep = wrt.data[i];
        wrt.data[i] = keep + kEps;
        const double up = scalar_fn();
        wrt.data[i] = keep - kEps;
        const double down = scalar_fn();
        wrt.data[i] = keep;
        g.data[i] = (up - down) / (2.0 * kEps);
    }
    return g;
}

double dot(const TensorD& a, const TensorD& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// True when some 2x2 window has its top two values closer than `margin`
// (finite differences would flip the argmax mid-stencil).
bool has_near_tie(const TensorD& t, double margin) {
    for (int64_t b = 0; b < t.shape.n; ++b) {
        for (int64_t c = 0; c < t.shape.c; ++c) {
            for (int64_t y = 0; y + 1 < t.shape.h; y += 2) {
                for (int64_t x = 0; x + 1 < t.shape.w; x += 2) {
                    double top = -1e300, second = -1e300;
                    for (int64_t dy = 0; dy < 2; ++dy) {
                        for (int64_t dx = 0; dx < 2; ++dx) {
                            const double v = t.at(b, c, y + dy, x + dx);
                            if (v > top) {
                                second = top;
                                top = v;
                            } else if (v > second) {
                                second = v;
                            }
                        }
                    }
                    if (top - second < margin) return true;
                }
            }
        }
    }
    return false;
}

double conv_instance(RngState& rng, bool corrupt) {
    const ConvSpec spec = ConvSpec::same(2, 3, 3, 2);
    TensorD x = randn({1, 2, 5, 5}, rng);
    TensorD w = randn({3, 2, 3, 3}, rng, 0.5);
    TensorD b = randn({1, 3, 1, 1}, rng, 0.1);
    const TensorD probe = randn({1, 3, 5, 5}, rng);

    auto loss = [&] {
        return dot(conv2d_forward(x, w, b, spec, static_cast<ConvTape<double>*>(nullptr), kSerial),
                   probe);
    };

    ConvTape<double> tape;
    conv2d_forward(x, w, b, spec, &tape, kSerial);
    ConvGrads<double> g = conv2d_backward(probe, w, tape, spec, kSerial);
    if (corrupt) g.weights.data[0] += 0.5;

    double worst = rel_err(g.input, fd_grad(x, loss));
    worst = std::max(worst, rel_err(g.weights, fd_grad(w, loss)));
    worst = std::max(worst, rel_err(g.bias, fd_grad(b, loss)));
    return worst;
}

double maxpool_instance(RngState& rng) {
    TensorD x = randn({1, 2, 6, 6}, rng);
    while (has_near_tie(x, 1e-3)) x = randn({1, 2, 6, 6}, rng);
    const TensorD probe = randn({1, 2, 3, 3}, rng);
    auto loss = [&] { return dot(maxpool2_forward(x, kSerial).output, probe); };

    MaxPoolResult<double> fwd = maxpool2_forward(x, kSerial);
    const TensorD analytic = maxpool2_backward(probe, fwd.indices, kSerial);
    return rel_err(analytic, fd_grad(x, loss));
}

double maxunpool_instance(RngState& rng) {
    TensorD base = randn({1, 2, 6, 6}, rng);
    MaxPoolResult<double> pooled = maxpool2_forward(base, kSerial);
    TensorD x = randn(pooled.output.shape, rng);
    const TensorD probe = randn(base.shape, rng);
    auto loss = [&] {
        return dot(maxunpool2_forward(x, pooled.indices, base.shape, kSerial), probe);
    };

    const TensorD analytic = maxunpool2_backward(probe, pooled.indices, kSerial);
    return rel_err(analytic, fd_grad(x, loss));
}

double bilinear_instance(RngState& rng) {
    TensorD x = randn({1, 2, 4, 5}, rng);
    const TensorD probe = randn({1, 2, 8, 10}, rng);
    auto loss = [&] { return dot(bilinear_upsample2(x, kSerial), probe); };

    const TensorD analytic = bilinear_upsample2_backward(probe, x.shape, kSerial);
    return rel_err(analytic, fd_grad(x, loss));
}

double resblock_instance(RngState& rng) {
    const ConvSpec spec = ConvSpec::same(2, 2, 3, 1);
    TensorD x, w1, b1, w2, b2;
    // Finite differencing across a ReLU kink is meaningless; redraw until
    // every pre-activation clears the stencil by a wide margin.
    while (true) {
        x = randn({1, 2, 5, 5}, rng);
        w1 = randn({2, 2, 3, 3}, rng, 0.5);
        b1 = randn({1, 2, 1, 1}, rng, 0.3);
        w2 = randn({2, 2, 3, 3}, rng, 0.5);
        b2 = randn({1, 2, 1, 1}, rng, 0.3);
        const TensorD a1 =
            conv2d_forward(x, w1, b1, spec, static_cast<ConvTape<double>*>(nullptr), kSerial);
        double closest = 1e300;
        for (double v : a1.data) closest = std::min(closest, std::abs(v));
        if (closest > 1e-3) break;
    }
    const TensorD probe = randn(x.shape, rng);

    auto loss = [&] {
        return dot(resblock_forward(x, w1, b1, w2, b2, spec,
                                    static_cast<ResblockTape<double>*>(nullptr), kSerial),
                   probe);
    };

    ResblockTape<double> tape;
    resblock_forward(x, w1, b1, w2, b2, spec, &tape, kSerial);
    ResblockGrads<double> g = resblock_backward(probe, w1, w2, tape, spec, kSerial);

    double worst = rel_err(g.input, fd_grad(x, loss));
    worst = std::max(worst, rel_err(g.w1, fd_grad(w1, loss)));
    worst = std::max(worst, rel_err(g.b1, fd_grad(b1, loss)));
    worst = std::max(worst, rel_err(g.w2, fd_grad(w2, loss)));
    worst = std::max(worst, rel_err(g.b2, fd_grad(b2, loss)));
    return worst;
}

double ssim_instance(RngState& rng) {
    TensorD x({1, 1, 16, 16});
    TensorD y({1, 1, 16, 16});
    for (auto& v : x.data) v = 0.5 + 0.2 * rng.normal();
    for (auto& v : y.data) v = 0.5 + 0.2 * rng.normal();

    TensorD analytic;
    ssim_with_grad(x, y, analytic, SsimConfig{}, kSerial);
    auto loss = [&] { return ssim(x, y, SsimConfig{}, kSerial); };
    return rel_err(analytic, fd_grad(x, loss));
}

KernelCheck repeat(const char* name, double threshold, RngState& rng,
                   const std::function<double(RngState&)>& instance) {
    double worst = 0.0;
    for (int i = 0; i < kInstancesPerKernel; ++i) worst = std::max(worst, instance(rng));
    return {name, worst, threshold, worst <= threshold};
}

KernelCheck check_full_model(RngState& rng) {
    ModelConfig cfg;
    cfg.width = 4;
    cfg.depth = 1;
    SrnetModel<double> model(cfg, RngState::from_seed(rng.next_u64()));

    TensorD input({1, 3, 8, 8});
    for (auto& v : input.data) v = rng.uniform();
    const TensorD probe = randn(input.shape, rng);

    auto loss = [&] {
        return dot(
            model.forward(input, static_cast<ForwardTrace<double>*>(nullptr), kSerial).background,
            probe);
    };

    ForwardTrace<double> trace;
    model.forward(input, &trace, kSerial);
    model.params().zero_grads();
    model.backward(probe, trace, kSerial);

    double worst = 0.0;
    for (size_t i = 0; i < model.params().size(); ++i) {
        const TensorD analytic = model.params().grad(i);
        const TensorD fd = fd_grad(model.params().value(i), loss);
        worst = std::max(worst, rel_err(analytic, fd));
    }
    return {"srnet_full_model", worst, 1e-4, worst <= 1e-4};
}

KernelCheck check_adam(RngState& rng) {
    // 10 steps against a scalar transcription of the update rule.
    ParameterStore<double> store;
    store.add("p", randn({1, 1, 2, 3}, rng));
    OptimState<double> state = OptimState<double>::init_like(store);
    const AdamConfig acfg;

    std::vector<double> theta(store.value(0).data.begin(), store.value(0).data.end());
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);

    double worst = 0.0;
    for (int step = 1; step <= 10; ++step) {
        const TensorD g = randn(store.value(0).shape, rng);
        store.grad(0) = g;
        adam_step(store, state, 1e-3, acfg);
        for (size_t j = 0; j < theta.size(); ++j) {
            m[j] = acfg.beta1 * m[j] + (1 - acfg.beta1) * g.data[j];
            v[j] = acfg.beta2 * v[j] + (1 - acfg.beta2) * g.data[j] * g.data[j];
            const double mh = m[j] / (1 - std::pow(acfg.beta1, step));
            const double vh = v[j] / (1 - std::pow(acfg.beta2, step));
            theta[j] -= 1e-3 * mh / (std::sqrt(vh) + acfg.eps);
            worst = std::max(worst, std::abs(theta[j] - store.value(0).data[j]));
        }
    }
    return {"adam_step_vs_scalar", worst, 1e-7, worst <= 1e-7};
}

}  // namespace

std::vector<KernelCheck> run_gradcheck(const GradcheckOptions& opts) {
    RngState rng = RngState::from_seed(opts.seed);
    std::vector<KernelCheck> out;
    const bool corrupt = opts.corrupt_conv_backward;
    out.push_back(repeat("conv2d_backward", 1e-6, rng,
                         [corrupt](RngState& r) { return conv_instance(r, corrupt); }));
    out.push_back(repeat("maxpool2_backward", 1e-6, rng, maxpool_instance));
    out.push_back(repeat("maxunpool2_backward", 1e-6, rng, maxunpool_instance));
    out.push_back(repeat("bilinear_upsample2_backward", 1e-6, rng, bilinear_instance));
    out.push_back(repeat("resblock_backward", 1e-6, rng, resblock_instance));
    out.push_back(repeat("ssim_grad", 1e-4, rng, ssim_instance));
    out.push_back(check_full_model(rng));
    out.push_back(check_adam(rng));
    return out;
}

bool all_passed(const std::vector<KernelCheck>& checks) {
    for (const auto& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

}  // namespace srnet
