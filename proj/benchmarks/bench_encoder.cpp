#include <benchmark/benchmark.h>

#include "taser/encoder.hpp"
#include "taser/objective.hpp"

using namespace taser;

namespace {

EncoderConfig bench_config(RoutingKind kind) {
    EncoderConfig cfg;
    cfg.vocab_size = 1024;
    cfg.max_positions = 64;
    cfg.d_model = 32;
    cfg.ffn_inner = 128;
    cfg.num_heads = 4;
    cfg.num_blocks = 6;
    cfg.interleave_period = 2;
    cfg.num_experts = kind == RoutingKind::Shared ? 1 : 2;
    cfg.routing = kind;
    return cfg;
}

std::vector<int> sequence(int len) {
    std::vector<int> ids{0};
    for (int i = 1; i < len; ++i) ids.push_back(4 + (i * 7) % 1000);
    return ids;
}

void BM_EncodeEval(benchmark::State& state) {
    Rng rng(1, 0);
    TaserEncoder enc = init_encoder(bench_config(RoutingKind::Det), rng);
    std::vector<int> ids = sequence(static_cast<int>(state.range(0)));
    NoGradGuard guard;
    Rng fwd(0, 0);
    for (auto _ : state) {
        Tensor cls = encode(enc, ids, InputKind::Passage, RunMode::Eval, fwd).cls;
        benchmark::DoNotOptimize(cls.data().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeEval)->Arg(8)->Arg(16)->Arg(32);

void BM_EncodeTrainStep(benchmark::State& state) {
    // Forward + backward of a one-question contrastive step.
    Rng rng(2, 0);
    TaserEncoder enc = init_encoder(bench_config(RoutingKind::Det), rng);
    std::vector<int> q = sequence(8);
    std::vector<int> pos = sequence(16);
    std::vector<int> neg = sequence(14);
    Rng fwd(0, 0);
    for (auto _ : state) {
        enc.zero_grads();
        Tensor qv = encode(enc, q, InputKind::Question, RunMode::Train, fwd).cls;
        Tensor pv = encode(enc, pos, InputKind::Passage, RunMode::Train, fwd).cls;
        Tensor nv = encode(enc, neg, InputKind::Passage, RunMode::Train, fwd).cls;
        Tensor loss = contrastive_loss(qv, pv, {nv});
        loss.backward();
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(BM_EncodeTrainStep);

void BM_EncodeTokRouting(benchmark::State& state) {
    Rng rng(3, 0);
    TaserEncoder enc = init_encoder(bench_config(RoutingKind::Tok), rng);
    std::vector<int> ids = sequence(16);
    Rng fwd(0, 0);
    for (auto _ : state) {
        EncodeResult res = encode(enc, ids, InputKind::Passage, RunMode::Train, fwd);
        benchmark::DoNotOptimize(res.cls.data().data());
    }
}
BENCHMARK(BM_EncodeTokRouting);

}  // namespace

BENCHMARK_MAIN();
