#include <qvlab/noise.hpp>
#include <qvlab/regularization.hpp>
#include <qvlab/spde.hpp>

#include <benchmark/benchmark.h>

namespace {

using namespace qvlab;

const TruncatedSpace& space() {
    static TruncatedSpace s = make_dirichlet_space(8);
    return s;
}

const TimeGrid& grid() {
    static TimeGrid g(0.0, 1.0, 1024);
    return g;
}

const VecPath& wiener() {
    static VecPath w = sample_q_wiener(space(), grid(), SeedSpec{42, 0, "bench"});
    return w;
}

void BM_sample_q_wiener(benchmark::State& state) {
    std::uint64_t j = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(sample_q_wiener(space(), grid(), SeedSpec{42, j++, "bench"}));
}
BENCHMARK(BM_sample_q_wiener);

void BM_scalar_qv(benchmark::State& state) {
    const double eps = state.range(0) * grid().dt();
    for (auto _ : state) benchmark::DoNotOptimize(scalar_qv(wiener(), eps));
}
BENCHMARK(BM_scalar_qv)->Arg(1)->Arg(4)->Arg(32);

void BM_tensor_qv_final(benchmark::State& state) {
    const double eps = 4.0 * grid().dt();
    for (auto _ : state) benchmark::DoNotOptimize(tensor_qv_final(wiener(), wiener(), eps));
}
BENCHMARK(BM_tensor_qv_final);

void BM_h1_diagnostic(benchmark::State& state) {
    const double eps = 4.0 * grid().dt();
    for (auto _ : state)
        benchmark::DoNotOptimize(h1_diagnostic(space(), wiener(), wiener(), eps));
}
BENCHMARK(BM_h1_diagnostic);

void BM_simulate_mild(benchmark::State& state) {
    const SPDEModel model = make_heat_model(space(), Vec::Ones(8));
    for (auto _ : state) benchmark::DoNotOptimize(simulate_mild(model, grid(), wiener()));
}
BENCHMARK(BM_simulate_mild);

void BM_projective_norm(benchmark::State& state) {
    Mat u = Mat::Random(8, 8);
    for (auto _ : state) benchmark::DoNotOptimize(projective_norm(u));
}
BENCHMARK(BM_projective_norm);

}  // namespace

BENCHMARK_MAIN();
