#include <benchmark/benchmark.h>
#include <omp.h>

#include "upr/bm25.hpp"
#include "upr/synthetic.hpp"
#include "upr/text.hpp"

namespace {

upr::SyntheticCollection collection()
{
    upr::SyntheticOptions options;
    options.queries = 200;
    options.filler_passages = 5000;
    return upr::make_synthetic_collection(options);
}

struct Fixture {
    upr::SyntheticCollection data = collection();
    std::vector<upr::Query>& queries = data.queries;
    upr::Bm25Index index = upr::build_index(data.corpus);
    std::vector<std::vector<std::string>> terms;

    Fixture()
    {
        for (const auto& q : queries) {
            terms.push_back(upr::analyze(q.text));
        }
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

void BM_RetrieveExhaustiveSerial(benchmark::State& state)
{
    const auto& f = fixture();
    for (auto _ : state) {
        for (const auto& t : f.terms) {
            benchmark::DoNotOptimize(upr::retrieve_exhaustive(f.index, t, 100));
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.terms.size()));
}

void BM_RetrieveSerial(benchmark::State& state)
{
    const auto& f = fixture();
    for (auto _ : state) {
        for (const auto& t : f.terms) {
            benchmark::DoNotOptimize(upr::retrieve(f.index, t, 100));
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.terms.size()));
}

void BM_RetrieveBatchOpenMP(benchmark::State& state)
{
    const auto& f = fixture();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(upr::retrieve_batch(f.index, f.queries, 100));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.queries.size()));
}

}  // namespace

BENCHMARK(BM_RetrieveExhaustiveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RetrieveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RetrieveBatchOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
