#include <benchmark/benchmark.h>

#include "srnet/conv2d.hpp"
#include "srnet/metrics.hpp"
#include "srnet/model.hpp"
#include "srnet/pooling.hpp"
#include "srnet/rng.hpp"

using namespace srnet;

namespace {

TensorF random_tensor(const TensorShape& s, uint64_t seed) {
    RngState rng = RngState::from_seed(seed);
    TensorF t(s);
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    return t;
}

void BM_conv2d_direct(benchmark::State& state) {
    const int64_t n = state.range(0);
    const ConvSpec spec = ConvSpec::same(n, n, 3, 1);
    const TensorF in = random_tensor({1, n, 64, 64}, 1);
    const TensorF w = random_tensor({n, n, 3, 3}, 2);
    const TensorF b = random_tensor({1, n, 1, 1}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward_direct(in, w, b, spec, nullptr, ExecOpts{1}));
    }
    state.SetItemsProcessed(state.iterations() * 64 * 64 * n * n * 9);
}
BENCHMARK(BM_conv2d_direct)->Arg(8)->Arg(32)->Arg(64);

void BM_conv2d_im2col(benchmark::State& state) {
    const int64_t n = state.range(0);
    const ConvSpec spec = ConvSpec::same(n, n, 3, 1);
    const TensorF in = random_tensor({1, n, 64, 64}, 1);
    const TensorF w = random_tensor({n, n, 3, 3}, 2);
    const TensorF b = random_tensor({1, n, 1, 1}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward(in, w, b, spec, nullptr, ExecOpts{1}));
    }
    state.SetItemsProcessed(state.iterations() * 64 * 64 * n * n * 9);
}
BENCHMARK(BM_conv2d_im2col)->Arg(8)->Arg(32)->Arg(64);

void BM_conv2d_im2col_dilated(benchmark::State& state) {
    const ConvSpec spec = ConvSpec::same(32, 32, 3, state.range(0));
    const TensorF in = random_tensor({1, 32, 64, 64}, 1);
    const TensorF w = random_tensor({32, 32, 3, 3}, 2);
    const TensorF b = random_tensor({1, 32, 1, 1}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward(in, w, b, spec, nullptr, ExecOpts{1}));
    }
}
BENCHMARK(BM_conv2d_im2col_dilated)->Arg(1)->Arg(2)->Arg(3);

void BM_maxpool(benchmark::State& state) {
    const TensorF in = random_tensor({1, 64, 128, 128}, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(maxpool2_forward(in, ExecOpts{1}));
    }
}
BENCHMARK(BM_maxpool);

void BM_ssim_with_grad(benchmark::State& state) {
    const TensorF x = random_tensor({1, 3, 96, 96}, 5);
    const TensorF y = random_tensor({1, 3, 96, 96}, 6);
    TensorF grad;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ssim_with_grad(x, y, grad, SsimConfig{}, ExecOpts{1}));
    }
}
BENCHMARK(BM_ssim_with_grad);

void BM_model_forward_desk(benchmark::State& state) {
    ModelConfig cfg;
    cfg.width = 8;
    cfg.depth = 1;
    SrnetModel<float> model(cfg, RngState::from_seed(7));
    const TensorF in = random_tensor({4, 3, 48, 48}, 8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(in, nullptr, ExecOpts{1}));
    }
}
BENCHMARK(BM_model_forward_desk);

}  // namespace

BENCHMARK_MAIN();
