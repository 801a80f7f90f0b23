#include <benchmark/benchmark.h>

#include <coge/cycliq.hpp>
#include <coge/explain.hpp>
#include <coge/gcn.hpp>
#include <coge/ot.hpp>
#include <coge/rng.hpp>

namespace {

coge::Matrix random_points(int n, int d, std::uint64_t seed) {
    coge::Rng rng(seed);
    coge::Matrix m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = rng.uniform_real(-1.0, 1.0);
    return m;
}

void BM_Sinkhorn(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    coge::TransportProblem p;
    p.cost = coge::cost_matrix(random_points(n, 20, 1), random_points(n, 20, 2));
    p.a = coge::Vector::Constant(n, 1.0 / n);
    p.b = p.a;
    const double eps = coge::scaled_epsilon(p.cost);
    for (auto _ : state) benchmark::DoNotOptimize(coge::sinkhorn(p, eps).objective);
}
BENCHMARK(BM_Sinkhorn)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_Divergence(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const coge::Matrix za = random_points(n, 20, 3);
    const coge::Matrix zb = random_points(n, 20, 4);
    const coge::Vector w = coge::Vector::Constant(n, 1.0 / n);
    for (auto _ : state) benchmark::DoNotOptimize(coge::sinkhorn_divergence(za, w, zb, w).value);
}
BENCHMARK(BM_Divergence)->Arg(16)->Arg(32);

struct Fixture {
    coge::Dataset ds = coge::generate_cycliq(60, 5);
    coge::GcnModel model = coge::GcnModel::glorot(ds.feature_dim.value_or(10), 20, 5, 2, 7);
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_Forward(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state)
        for (const auto& g : f.ds.graphs) benchmark::DoNotOptimize(coge::predict(f.model, g));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.ds.size()));
}
BENCHMARK(BM_Forward);

void BM_ExplainCoge(benchmark::State& state) {
    const auto& f = fixture();
    coge::ExplainConfig cfg;
    cfg.k = 5;
    cfg.steps = static_cast<int>(state.range(0));
    const auto& g = f.ds.graphs.front();
    for (auto _ : state) benchmark::DoNotOptimize(coge::explain_coge(g, f.model, f.ds, cfg));
}
BENCHMARK(BM_ExplainCoge)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
