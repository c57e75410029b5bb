#include <benchmark/benchmark.h>

#include "taser/tensor.hpp"

using namespace taser;

namespace {

Tensor random_matrix(int rows, int cols, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    for (double& v : t.impl()->data) v = -1.0 + 2.0 * rng.uniform();
    return t;
}

void BM_Matmul(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Rng rng(1, 0);
    Tensor a = random_matrix(n, n, rng);
    Tensor b = random_matrix(n, n, rng);
    NoGradGuard guard;
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Rng rng(2, 0);
    Tensor a = random_matrix(n, n, rng).set_requires_grad(true);
    Tensor b = random_matrix(n, n, rng).set_requires_grad(true);
    for (auto _ : state) {
        a.zero_grad();
        b.zero_grad();
        sum(matmul(a, b)).backward();
        benchmark::DoNotOptimize(a.grad().data());
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_LayerNormRows(benchmark::State& state) {
    int rows = static_cast<int>(state.range(0));
    Rng rng(3, 0);
    Tensor x = random_matrix(rows, 64, rng);
    Tensor gain = Tensor::full({64}, 1.0);
    Tensor bias = Tensor::zeros({64});
    NoGradGuard guard;
    for (auto _ : state) {
        Tensor y = layer_norm(x, gain, bias, 1e-12);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_LayerNormRows)->Arg(16)->Arg(128);

void BM_SoftmaxRows(benchmark::State& state) {
    int rows = static_cast<int>(state.range(0));
    Rng rng(4, 0);
    Tensor x = random_matrix(rows, rows, rng);
    NoGradGuard guard;
    for (auto _ : state) {
        Tensor y = softmax(x, 1);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_SoftmaxRows)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
