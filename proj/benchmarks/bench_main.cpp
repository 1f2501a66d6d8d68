#include <benchmark/benchmark.h>

#include <random>

#include "sparseloc/codec.hpp"
#include "sparseloc/loss.hpp"
#include "sparseloc/model.hpp"

using namespace sparseloc;

namespace {

KeypointSet random_points(int n, int h, int w, uint64_t seed) {
    std::mt19937_64 rng(seed);
    KeypointSet s;
    for (int i = 0; i < n; ++i)
        s.points.push_back({static_cast<int>(rng() % h), static_cast<int>(rng() % w), 0.0});
    return s;
}

void bm_encode_target(benchmark::State& state) {
    const KeypointSet kps = random_points(3, 64, 64, 1);
    const CodecParams params;
    for (auto _ : state) benchmark::DoNotOptimize(encode_target(kps, 64, 64, params));
}
BENCHMARK(bm_encode_target);

void bm_decode_points(benchmark::State& state) {
    const Heatmap h = encode_target(random_points(12, 64, 64, 2), 64, 64, CodecParams{});
    DecodeParams dp;
    for (auto _ : state) benchmark::DoNotOptimize(decode_points(h, dp));
}
BENCHMARK(bm_decode_points);

void bm_loss_crag_and_tail(benchmark::State& state) {
    const Heatmap target = encode_target(random_points(3, 64, 64, 3), 64, 64, CodecParams{});
    Heatmap pred(64, 64, HeatmapRole::logit);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (double& v : pred.values) v = u(rng);
    LossConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_loss(target, pred, 2, cfg));
}
BENCHMARK(bm_loss_crag_and_tail);

void bm_model_forward(benchmark::State& state) {
    const ModelState model = init_model(ModelSpec{}, 5);
    std::vector<double> image(3 * 64 * 64);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : image) v = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(forward(model, image, 64, 64));
}
BENCHMARK(bm_model_forward);

void bm_model_backward(benchmark::State& state) {
    const ModelState model = init_model(ModelSpec{}, 7);
    std::vector<double> image(3 * 64 * 64);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : image) v = u(rng);
    ForwardTrace trace;
    forward(model, image, 64, 64, &trace);
    std::vector<double> grad(64 * 64, 0.01);
    for (auto _ : state) benchmark::DoNotOptimize(backward(model, trace, grad));
}
BENCHMARK(bm_model_backward);

}  // namespace

BENCHMARK_MAIN();
