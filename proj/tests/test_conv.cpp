#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "srnet/conv2d.hpp"
#include "srnet/rng.hpp"

using namespace srnet;

namespace {

template <typename T>
Tensor<T> randn(const TensorShape& s, RngState& rng, double scale = 1.0) {
    Tensor<T> t(s);
    for (auto& v : t.data) v = static_cast<T>(scale * rng.normal());
    return t;
}

template <typename T>
double max_rel_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = std::abs(double(a.data[i]) - double(b.data[i]));
        const double m = std::max({std::abs(double(a.data[i])), std::abs(double(b.data[i])), 1.0});
        worst = std::max(worst, d / m);
    }
    return worst;
}

}  // namespace

TEST_CASE("all-ones 3x3 input and kernel, DF=1: center 9, corners 4") {
    const ConvSpec spec = ConvSpec::same(1, 1, 3, 1);
    const TensorF in = TensorF::ones({1, 1, 3, 3});
    const TensorF w = TensorF::ones({1, 1, 3, 3});
    const TensorF b = TensorF::zeros({1, 1, 1, 1});
    const TensorF out = conv2d_forward(in, w, b, spec);
    CHECK(out.at(0, 0, 1, 1) == 9.0f);
    CHECK(out.at(0, 0, 0, 0) == 4.0f);
    CHECK(out.at(0, 0, 0, 2) == 4.0f);
    CHECK(out.at(0, 0, 2, 0) == 4.0f);
    CHECK(out.at(0, 0, 2, 2) == 4.0f);
    CHECK(out.at(0, 0, 0, 1) == 6.0f);
}

TEST_CASE("impulse response with DF=3 scatters the kernel on the dilated grid") {
    const ConvSpec spec = ConvSpec::same(1, 1, 3, 3);  // padding 3
    RngState rng = RngState::from_seed(2);
    TensorF w = randn<float>({1, 1, 3, 3}, rng);
    for (auto& v : w.data) {
        if (v == 0.0f) v = 0.5f;  // all taps nonzero
    }
    const TensorF b = TensorF::zeros({1, 1, 1, 1});
    TensorF in = TensorF::zeros({1, 1, 16, 16});
    in.at(0, 0, 8, 8) = 1.0f;

    const TensorF out = conv2d_forward(in, w, b, spec);
    REQUIRE(out.shape == in.shape);
    // correlation form: output at offset (-dy,-dx) picks kernel tap (ky,kx)
    int nonzeros = 0;
    for (int64_t y = 0; y < 16; ++y) {
        for (int64_t x = 0; x < 16; ++x) {
            const float v = out.at(0, 0, y, x);
            const int64_t dy = y - 8, dx = x - 8;
            const bool on_grid = (std::abs(dy) == 3 || dy == 0) && (std::abs(dx) == 3 || dx == 0);
            if (v != 0.0f) {
                ++nonzeros;
                CHECK(on_grid);
                CHECK(v == w.at(0, 0, 1 - dy / 3, 1 - dx / 3));
            }
        }
    }
    CHECK(nonzeros == 9);
}

TEST_CASE("random instances match the direct oracle") {
    RngState rng = RngState::from_seed(31);
    for (int64_t df : {1, 2, 3}) {
        const ConvSpec spec = ConvSpec::same(3, 4, 3, df);
        const TensorF in = randn<float>({2, 3, 8, 8}, rng);
        const TensorF w = randn<float>({4, 3, 3, 3}, rng);
        const TensorF b = randn<float>({1, 4, 1, 1}, rng);
        const TensorF fast = conv2d_forward(in, w, b, spec);
        const TensorF ref = oracle::conv2d(in, w, b, df, spec.padding);
        CHECK(max_rel_diff(fast, ref) <= 1e-5);
    }
    // double precision
    const ConvSpec spec = ConvSpec::same(3, 4, 3, 2);
    const TensorD in = randn<double>({2, 3, 8, 8}, rng);
    const TensorD w = randn<double>({4, 3, 3, 3}, rng);
    const TensorD b = randn<double>({1, 4, 1, 1}, rng);
    CHECK(max_rel_diff(conv2d_forward(in, w, b, spec), oracle::conv2d(in, w, b, 2, spec.padding)) <=
          1e-12);
}

TEST_CASE("im2col fast path equals the direct path bit-for-bit") {
    RngState rng = RngState::from_seed(77);
    for (int trial = 0; trial < 20; ++trial) {
        const int64_t df = rng.uniform_int(1, 3);
        const int64_t k = rng.uniform_int(0, 1) ? 3 : 1;
        const ConvSpec spec = ConvSpec::same(2, 3, k, df);
        const TensorF in = randn<float>({2, 2, 10, 10}, rng);
        const TensorF w = randn<float>({3, 2, k, k}, rng);
        const TensorF b = randn<float>({1, 3, 1, 1}, rng);
        const TensorF fast = conv2d_forward(in, w, b, spec);
        const TensorF direct = conv2d_forward_direct(in, w, b, spec);
        CHECK(fast.same_bits(direct));
    }
}

TEST_CASE("results are identical under any thread count") {
    RngState rng = RngState::from_seed(78);
    const ConvSpec spec = ConvSpec::same(3, 5, 3, 2);
    const TensorF in = randn<float>({3, 3, 12, 12}, rng);
    const TensorF w = randn<float>({5, 3, 3, 3}, rng);
    const TensorF b = randn<float>({1, 5, 1, 1}, rng);
    const TensorF serial = conv2d_forward(in, w, b, spec, nullptr, ExecOpts{1});
    const TensorF threaded = conv2d_forward(in, w, b, spec, nullptr, ExecOpts{4});
    CHECK(serial.same_bits(threaded));
}

TEST_CASE("linearity with zero bias") {
    RngState rng = RngState::from_seed(13);
    const ConvSpec spec = ConvSpec::same(2, 2, 3, 2);
    const TensorD x = randn<double>({1, 2, 7, 7}, rng);
    const TensorD y = randn<double>({1, 2, 7, 7}, rng);
    const TensorD w = randn<double>({2, 2, 3, 3}, rng);
    const TensorD b0 = TensorD::zeros({1, 2, 1, 1});

    const TensorD lhs = conv2d_forward(add(scale(x, 2.0), scale(y, -3.0)), w, b0, spec);
    const TensorD rhs =
        add(scale(conv2d_forward(x, w, b0, spec), 2.0), scale(conv2d_forward(y, w, b0, spec), -3.0));
    CHECK(max_rel_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("backward: bias gradient is the per-channel sum, zero in means zero out") {
    RngState rng = RngState::from_seed(17);
    const ConvSpec spec = ConvSpec::same(2, 3, 3, 1);
    const TensorD in = randn<double>({2, 2, 6, 6}, rng);
    const TensorD w = randn<double>({3, 2, 3, 3}, rng);
    const TensorD b = randn<double>({1, 3, 1, 1}, rng);

    ConvTape<double> tape;
    conv2d_forward(in, w, b, spec, &tape);
    const TensorD gout = randn<double>({2, 3, 6, 6}, rng);
    const ConvGrads<double> g = conv2d_backward(gout, w, tape, spec);

    for (int64_t oc = 0; oc < 3; ++oc) {
        double s = 0.0;
        for (int64_t bb = 0; bb < 2; ++bb) {
            for (int64_t i = 0; i < 36; ++i) s += gout.plane(bb, oc)[i];
        }
        CHECK(g.bias.at(0, oc, 0, 0) == doctest::Approx(s).epsilon(1e-12));
    }

    ConvTape<double> tape2;
    conv2d_forward(in, w, b, spec, &tape2);
    const ConvGrads<double> gz = conv2d_backward(TensorD::zeros({2, 3, 6, 6}), w, tape2, spec);
    CHECK(max_abs(gz.input) == 0.0);
    CHECK(max_abs(gz.weights) == 0.0);
    CHECK(max_abs(gz.bias) == 0.0);
}

TEST_CASE("tape misuse fails loudly") {
    RngState rng = RngState::from_seed(19);
    const ConvSpec spec = ConvSpec::same(1, 1, 3, 1);
    const TensorF in = randn<float>({1, 1, 4, 4}, rng);
    const TensorF w = randn<float>({1, 1, 3, 3}, rng);
    const TensorF b = TensorF::zeros({1, 1, 1, 1});

    ConvTape<float> tape;
    const TensorF out = conv2d_forward(in, w, b, spec, &tape);
    const ConvGrads<float> g = conv2d_backward(out, w, tape, spec);
    (void)g;
    CHECK_THROWS(conv2d_backward(out, w, tape, spec));  // double consumption

    ConvTape<float> tape2;
    conv2d_forward(in, w, b, spec, &tape2);
    CHECK_THROWS(conv2d_backward(randn<float>({1, 1, 5, 5}, rng), w, tape2, spec));
}

TEST_CASE("shape errors") {
    const ConvSpec spec = ConvSpec::same(2, 1, 3, 1);
    const TensorF in = TensorF::ones({1, 1, 4, 4});  // wrong channel count
    const TensorF w = TensorF::ones({1, 2, 3, 3});
    const TensorF b = TensorF::zeros({1, 1, 1, 1});
    CHECK_THROWS(conv2d_forward(in, w, b, spec));

    ConvSpec bad = spec;
    bad.dilation = 0;
    CHECK_THROWS(bad.validate());
    CHECK_NOTHROW(ConvSpec::same(1, 1, 3, 7).validate());  // kernel itself allows any dilation >= 1
}
