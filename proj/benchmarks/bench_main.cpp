#include <benchmark/benchmark.h>

#include "histokit/kmeans.hpp"
#include "histokit/metrics.hpp"
#include "histokit/network.hpp"
#include "histokit/preprocess.hpp"
#include "histokit/rng.hpp"

using namespace histokit;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const Tensor input = random_tensor({side, side, 3}, 1);
    const Tensor kernels = random_tensor({3, 3, 3, 8}, 2);
    const Tensor bias = random_tensor({8}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::conv2d_forward(input, kernels, bias, nn::Activation::Relu));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side) * side);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Arg(128);

void BM_NetworkBackward(benchmark::State& state) {
    nn::NetworkSpec net;
    net.input_shape = {32, 32, 3};
    net.layers = {nn::LayerSpec::conv2d(8, 3, nn::Activation::Relu), nn::LayerSpec::maxpool2d(2),
                  nn::LayerSpec::flatten(), nn::LayerSpec::dense(32, nn::Activation::Relu),
                  nn::LayerSpec::softmax_output(3)};
    const auto params = nn::init_parameters(net, 4);
    const Tensor input = random_tensor(net.input_shape, 5);
    for (auto _ : state) {
        const auto fwd = nn::network_forward(net, params, input);
        benchmark::DoNotOptimize(nn::network_backward(net, params, fwd.trace, 1));
    }
}
BENCHMARK(BM_NetworkBackward);

void BM_KMeansFit(benchmark::State& state) {
    Rng rng(6);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> p(16);
        for (auto& v : p) v = rng.uniform(-1, 1);
        points.push_back(std::move(p));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(filter::kmeans_fit(points, 2, 7));
    }
}
BENCHMARK(BM_KMeansFit);

void BM_RocAuc(benchmark::State& state) {
    Rng rng(8);
    std::vector<double> scores;
    std::vector<bool> labels;
    for (int i = 0; i < 100000; ++i) {
        scores.push_back(rng.uniform(0, 1));
        labels.push_back(rng.coin_flip());
    }
    labels[0] = true;
    labels[1] = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::auc(metrics::roc_curve(scores, labels)));
    }
}
BENCHMARK(BM_RocAuc);

void BM_ColorBalance(benchmark::State& state) {
    img::RgbImage image(512, 512);
    Rng rng(9);
    for (auto& p : image.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const auto params = img::balance_level_params(1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(img::color_balance(image, params));
    }
}
BENCHMARK(BM_ColorBalance);

void BM_ExtractPatches(benchmark::State& state) {
    img::RgbImage image(1024, 1024);
    Rng rng(10);
    for (auto& p : image.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    for (auto _ : state) {
        benchmark::DoNotOptimize(img::extract_patches(image, {128, 0.5}));
    }
}
BENCHMARK(BM_ExtractPatches);

}  // namespace

BENCHMARK_MAIN();
