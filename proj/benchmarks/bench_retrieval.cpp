#include <benchmark/benchmark.h>

#include "taser/bm25.hpp"
#include "taser/data.hpp"
#include "taser/dense.hpp"

using namespace taser;

namespace {

Corpus synthetic_corpus(int docs) {
    SynthConfig cfg;
    cfg.num_passages = docs;
    cfg.num_train = 0;
    cfg.num_dev = 0;
    cfg.seed = 5;
    return make_synthetic_task(cfg).corpus;
}

void BM_Bm25Build(benchmark::State& state) {
    Corpus corpus = synthetic_corpus(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        InvertedIndex index = InvertedIndex::build(corpus);
        benchmark::DoNotOptimize(index.num_docs());
    }
}
BENCHMARK(BM_Bm25Build)->Arg(256)->Arg(2048);

void BM_Bm25TopK(benchmark::State& state) {
    Corpus corpus = synthetic_corpus(static_cast<int>(state.range(0)));
    InvertedIndex index = InvertedIndex::build(corpus);
    std::string query = "what keya1 keyb2 keyc3 the of";
    for (auto _ : state) {
        RankedList out = index.topk(query, 100);
        benchmark::DoNotOptimize(out.items.data());
    }
}
BENCHMARK(BM_Bm25TopK)->Arg(256)->Arg(2048)->Arg(16384);

void BM_DenseTopK(benchmark::State& state) {
    int rows = static_cast<int>(state.range(0));
    const int dim = 64;
    Rng rng(7, 0);
    DenseIndex index;
    index.dim = dim;
    index.vectors.resize(static_cast<std::size_t>(rows) * dim);
    for (double& v : index.vectors) v = -1.0 + 2.0 * rng.uniform();
    std::vector<double> q(dim);
    for (double& v : q) v = -1.0 + 2.0 * rng.uniform();
    for (auto _ : state) {
        RankedList out = dense_topk(index, q, 100);
        benchmark::DoNotOptimize(out.items.data());
    }
    state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_DenseTopK)->Arg(1024)->Arg(16384)->Arg(131072);

void BM_HybridRank(benchmark::State& state) {
    Rng rng(8, 0);
    std::vector<int> ids(400);
    for (int i = 0; i < 400; ++i) ids[static_cast<std::size_t>(i)] = i;
    rng.shuffle(ids);
    RankedList dense, sparse;
    for (int i = 0; i < 100; ++i) {
        dense.items.push_back({ids[static_cast<std::size_t>(i)], rng.uniform()});
        sparse.items.push_back({ids[static_cast<std::size_t>(100 + i)], rng.uniform()});
    }
    canonical_sort(dense.items);
    canonical_sort(sparse.items);
    for (auto _ : state) {
        RankedList out = hybrid_rank(dense, sparse, 1.3, 20);
        benchmark::DoNotOptimize(out.items.data());
    }
}
BENCHMARK(BM_HybridRank);

}  // namespace

BENCHMARK_MAIN();
