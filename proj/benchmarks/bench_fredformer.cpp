#include "fredformer/fredformer.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fredformer;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
    return m;
}

FredformerConfig bench_config(Eigen::Index channels) {
    FredformerConfig cfg;
    cfg.channels = channels;
    return cfg;
}

void BM_DftPlanForward(benchmark::State& state) {
    const Eigen::Index length = state.range(0);
    const DftPlan plan(length);
    const Matrix x = random_matrix(224, length, 1);
    Matrix re;
    Matrix im;
    for (auto _ : state) {
        plan.forward(x, re, im);
        benchmark::DoNotOptimize(re.data());
    }
    state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_DftPlanForward)->Arg(96)->Arg(336)->Arg(720);

void BM_DftPlanInverse(benchmark::State& state) {
    const Eigen::Index length = state.range(0);
    const DftPlan plan(length);
    const Matrix re = random_matrix(224, length / 2, 2);
    const Matrix im = random_matrix(224, length / 2, 3);
    for (auto _ : state) benchmark::DoNotOptimize(plan.inverse(re, im).data());
    state.SetItemsProcessed(state.iterations() * re.rows());
}
BENCHMARK(BM_DftPlanInverse)->Arg(96)->Arg(720);

void BM_Forecast(benchmark::State& state) {
    const auto cfg = bench_config(state.range(0));
    const Fredformer model(cfg);
    const auto params = model.init_params();
    const Matrix x = random_matrix(32 * cfg.channels, cfg.lookback, 4);
    for (auto _ : state) benchmark::DoNotOptimize(model.forecast_batch(params, x).data());
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Forecast)->Arg(1)->Arg(7)->Arg(21)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    auto cfg = bench_config(state.range(0));
    cfg.use_nystrom = state.range(1) != 0;
    cfg.landmarks = std::min<Eigen::Index>(8, cfg.channels);
    const Fredformer model(cfg);
    const auto params = model.init_params();
    const Matrix x = random_matrix(32 * cfg.channels, cfg.lookback, 5);
    const Matrix y = random_matrix(32 * cfg.channels, cfg.horizon, 6);
    ModelParams grad;
    for (auto _ : state) benchmark::DoNotOptimize(model.loss_and_gradient(params, x, y, grad));
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->Args({7, 0})->Args({21, 0})->Args({21, 1})->Unit(benchmark::kMillisecond);

void BM_ExactAttention(benchmark::State& state) {
    const Eigen::Index c = state.range(0);
    const Matrix q = random_matrix(c, 16, 7, 0.5);
    const Matrix k = random_matrix(c, 16, 8, 0.5);
    const Matrix v = random_matrix(c, 16, 9);
    for (auto _ : state) benchmark::DoNotOptimize(exact_attention(q, k, v).output.data());
    state.SetComplexityN(c);
}
BENCHMARK(BM_ExactAttention)->RangeMultiplier(4)->Range(32, 2048)->Complexity();

void BM_NystromAttention(benchmark::State& state) {
    const Eigen::Index c = state.range(0);
    const Matrix q = random_matrix(c, 16, 7, 0.5);
    const Matrix k = random_matrix(c, 16, 8, 0.5);
    const Matrix v = random_matrix(c, 16, 9);
    for (auto _ : state) benchmark::DoNotOptimize(nystrom_attention(q, k, v, 16).data());
    state.SetComplexityN(c);
}
BENCHMARK(BM_NystromAttention)->RangeMultiplier(4)->Range(32, 2048)->Complexity();

}  // namespace

BENCHMARK_MAIN();
