#include <benchmark/benchmark.h>

#include <cmath>
#include <span>

#include "kolmo/evolution.hpp"
#include "kolmo/montecarlo.hpp"
#include "kolmo/states.hpp"
#include "kolmo/systems.hpp"

using namespace kolmo;

namespace {

BasisSet basis_K(const SystemSpec& s, unsigned K) {
    return enumerate_basis(s.dim(), RegularizationScheme::max_order(K, s.rates), s.rates);
}

void BM_BasisEnumeration(benchmark::State& st) {
    const Rates r(8, 0.1);
    const unsigned K = unsigned(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(enumerate_basis(r.size(), RegularizationScheme::max_order(K, r), r).size());
}
BENCHMARK(BM_BasisEnumeration)->Arg(3)->Arg(5);

void BM_OscillatorC(benchmark::State& st) {
    const auto spec = oscillator_system({});
    const auto basis = basis_K(spec, unsigned(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(assemble_C(basis, spec).mat.nonZeros());
    st.counters["dim"] = double(basis.size());
}
BENCHMARK(BM_OscillatorC)->Arg(6)->Arg(20);

void BM_NavierStokesC(benchmark::State& st) {
    const auto spec = nse_system(make_nse(std::size_t(st.range(0)), 0.1, 1e-5));
    const auto basis = basis_K(spec, 3);
    for (auto _ : st) benchmark::DoNotOptimize(assemble_C(basis, spec).mat.nonZeros());
    st.counters["dim"] = double(basis.size());
}
BENCHMARK(BM_NavierStokesC)->Arg(12)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_KrylovExpv(benchmark::State& st) {
    const auto spec = oscillator_system({});
    const auto basis = basis_K(spec, unsigned(st.range(0)));
    const auto ops = assemble_operators(basis, spec);
    const HermiteContext ctx(spec.rates, spec.q);
    const double w[] = {1.0, 0.0};
    const KEState psi0{initial_state_linear(w, basis, ctx), 0.0};
    for (auto _ : st) benchmark::DoNotOptimize(evolve_krylov(psi0, ops, 5.0).psi.norm());
    st.counters["dim"] = double(basis.size());
}
BENCHMARK(BM_KrylovExpv)->Arg(6)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Trotter(benchmark::State& st) {
    const auto spec = oscillator_system({});
    const auto basis = basis_K(spec, 6);
    const auto ops = assemble_operators(basis, spec);
    const HermiteContext ctx(spec.rates, spec.q);
    const double w[] = {1.0, 0.0};
    const KEState psi0{initial_state_linear(w, basis, ctx), 0.0};
    for (auto _ : st) benchmark::DoNotOptimize(evolve_trotter(psi0, ops, 5.0, unsigned(st.range(0))).psi.norm());
}
BENCHMARK(BM_Trotter)->Arg(16)->Arg(128);

void BM_Philox(benchmark::State& st) {
    Philox4x32::Counter c{0, 0, 0, 0};
    for (auto _ : st) {
        c = Philox4x32::block(c, {1, 2});
        benchmark::DoNotOptimize(c);
    }
    st.SetItemsProcessed(st.iterations() * 4);
}
BENCHMARK(BM_Philox);

void BM_Normals(benchmark::State& st) {
    NormalStream rng(1, 0);
    for (auto _ : st) benchmark::DoNotOptimize(rng.next());
    st.SetItemsProcessed(st.iterations());
}
BENCHMARK(BM_Normals);

void BM_MonteCarloOscillator(benchmark::State& st) {
    const auto spec = oscillator_system({});
    const double x0[] = {1.0, 0.0};
    const double ts[] = {0.0, 1.0};
    MCOptions o;
    o.samples = 2000;
    o.threads = 1;
    auto u0 = [](std::span<const double> x) { return x[0]; };
    for (auto _ : st) benchmark::DoNotOptimize(simulate(spec, x0, u0, ts, o).mean[1]);
    st.SetItemsProcessed(st.iterations() * 2000 * 1000);  // Euler steps
}
BENCHMARK(BM_MonteCarloOscillator)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
