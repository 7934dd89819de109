// Serial reference loop against the OpenMP batches, Picard and Newton assembly.
#include <benchmark/benchmark.h>
#include <omp.h>

#include "poromix/assembly.hpp"
#include "poromix/verification.hpp"

using namespace poromix;

namespace {

struct Setup {
    std::shared_ptr<const SpaceSet> spaces;
    ProblemData data;
    FormContext ctx;
};

Setup make_setup(int n, int k)
{
    Setup s;
    const ManufacturedCase mc = default_manufactured_case();
    s.spaces = make_space_set(std::make_shared<const Mesh>(build_structured_mesh(n, n, 1.0, 1.0)), k);
    s.data = derive_case_data(mc);
    s.ctx.spaces = s.spaces.get();
    s.ctx.params = mc.params;
    s.ctx.law = mc.law;
    s.ctx.frozen_strain = VectorXd::LinSpaced(s.spaces->num_dofs(Field::Strain), -0.2, 0.3);
    s.ctx.frozen_pressure = VectorXd::LinSpaced(s.spaces->num_dofs(Field::Pressure), 0.0, 1.0);
    return s;
}

void assemble(benchmark::State& state, bool parallel, bool newton)
{
    const Setup s = make_setup(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    const Assembler a(s.spaces);
    AssemblyOptions opt;
    opt.parallel = parallel;
    opt.newton = newton;
    for (auto _ : state) benchmark::DoNotOptimize(a.assemble(s.ctx, s.data, opt));
    state.counters["cells"] = s.spaces->mesh().num_cells();
    state.counters["threads"] = parallel ? omp_get_max_threads() : 1;
    state.SetItemsProcessed(state.iterations() * s.spaces->mesh().num_cells());
}

void BM_SerialPicard(benchmark::State& st) { assemble(st, false, false); }
void BM_ParallelPicard(benchmark::State& st) { assemble(st, true, false); }
void BM_SerialNewton(benchmark::State& st) { assemble(st, false, true); }
void BM_ParallelNewton(benchmark::State& st) { assemble(st, true, true); }

void sizes(benchmark::internal::Benchmark* b)
{
    for (int k : {0, 1})
        for (int n : {16, 32, 64}) b->Args({n, k});
    b->Unit(benchmark::kMillisecond);
}

} // namespace

BENCHMARK(BM_SerialPicard)->Apply(sizes);
BENCHMARK(BM_ParallelPicard)->Apply(sizes);
BENCHMARK(BM_SerialNewton)->Apply(sizes);
BENCHMARK(BM_ParallelNewton)->Apply(sizes);

BENCHMARK_MAIN();
