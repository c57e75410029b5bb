#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "taser/tensor.hpp"

using namespace taser;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.impl()->data) v = lo + (hi - lo) * rng.uniform();
    return t;
}

}  // namespace

TEST_CASE("matmul identity and hand dot product") {
    Tensor a = Tensor::from_vector({1, 2, 3, 4}, {2, 2});
    Tensor eye = Tensor::from_vector({1, 0, 0, 1}, {2, 2});
    Tensor prod = matmul(a, eye);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(prod.at(i, j) == a.at(i, j));

    Tensor r = Tensor::from_vector({1, 2}, {1, 2});
    Tensor c = Tensor::from_vector({3, 4}, {2, 1});
    CHECK(matmul(r, c).item() == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::from_vector({1, 2, 3, 4, 5, 6}, {2, 3});
    Tensor b = Tensor::from_vector({1, 2, 3, 4}, {4, 1});
    CHECK_THROWS_WITH_AS(matmul(a, b),
                         "matmul: inner dimensions disagree: [2 x 3] vs [4 x 1]",
                         std::invalid_argument);
}

TEST_CASE("matmul gradient matches ones * b^T and finite differences") {
    Rng rng(11, 0);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    a.set_requires_grad(true);
    sum(matmul(a, b)).backward();

    // d sum(a*b) / d a = ones(3x2) * b^T
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            double expected = 0.0;
            for (int k = 0; k < 2; ++k) expected += b.at(j * 2 + k);
            CHECK(a.grad()[static_cast<std::size_t>(i * 4 + j)] ==
                  doctest::Approx(expected).epsilon(1e-12));
        }

    double err = grad_check([&](const Tensor& x) { return sum(matmul(x, b)); }, a, 1e-6);
    CHECK(err < 1e-6);
}

TEST_CASE("relu forward cases") {
    Tensor x = Tensor::from_vector({-1, 0, 2}, {3});
    Tensor y = relu(x);
    CHECK(y.at(0) == 0.0);
    CHECK(y.at(1) == 0.0);
    CHECK(y.at(2) == 2.0);

    Tensor neg_in = Tensor::from_vector({-3, -0.5, -1e9}, {3});
    Tensor zeroed = relu(neg_in);
    for (double v : zeroed.data()) CHECK(v == 0.0);
}

TEST_CASE("relu gradient is the indicator mask, verified by finite differences") {
    Tensor x = Tensor::from_vector({0.5, -0.5, 1.5, -2.5}, {4});
    Tensor probe = x.detach();
    probe.set_requires_grad(true);
    sum(relu(probe)).backward();
    CHECK(probe.grad()[0] == 1.0);
    CHECK(probe.grad()[1] == 0.0);
    CHECK(probe.grad()[2] == 1.0);
    CHECK(probe.grad()[3] == 0.0);

    double err = grad_check([](const Tensor& t) { return sum(relu(t)); }, x, 1e-6);
    CHECK(err < 1e-6);
}

TEST_CASE("softmax symmetry, stability and hand values") {
    Tensor even = softmax(Tensor::from_vector({0, 0}, {2}), 0);
    CHECK(even.at(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(even.at(1) == doctest::Approx(0.5).epsilon(1e-15));

    Tensor big = softmax(Tensor::from_vector({1000, 0}, {2}), 0);
    CHECK(big.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(big.at(1) < 1e-300);
    CHECK(std::isfinite(big.at(0)));

    // e^1, e^2, e^3 table: 2.718282, 7.389056, 20.085537
    Tensor s = softmax(Tensor::from_vector({1, 2, 3}, {3}), 0);
    CHECK(s.at(0) == doctest::Approx(0.09003057).epsilon(1e-6));
    CHECK(s.at(1) == doctest::Approx(0.24472847).epsilon(1e-6));
    CHECK(s.at(2) == doctest::Approx(0.66524096).epsilon(1e-6));
}

TEST_CASE("softmax sums to one within 1e-12 for magnitudes up to 1e4") {
    Rng rng(5, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(30));
        Tensor x = random_tensor({n}, rng, -1e4, 1e4);
        Tensor s = softmax(x, 0);
        double total = 0.0;
        for (double v : s.data()) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax along both axes of a matrix") {
    Tensor x = Tensor::from_vector({1, 2, 3, 4, 5, 6}, {2, 3});
    Tensor rows = softmax(x, 1);
    for (int i = 0; i < 2; ++i) {
        double total = rows.at(i, 0) + rows.at(i, 1) + rows.at(i, 2);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
    Tensor cols = softmax(x, 0);
    for (int j = 0; j < 3; ++j) {
        double total = cols.at(0, j) + cols.at(1, j);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(softmax(x, 2), std::invalid_argument);
}

TEST_CASE("layer_norm trivial cases") {
    Tensor gain = Tensor::full({4}, 1.0);
    Tensor bias = Tensor::zeros({4});
    Tensor constant = Tensor::full({4}, 3.7);
    Tensor y = layer_norm(constant, gain, bias, 1e-12);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));

    Tensor pm = Tensor::from_vector({1, -1}, {2});
    Tensor y2 = layer_norm(pm, Tensor::full({2}, 1.0), Tensor::zeros({2}), 1e-15);
    CHECK(y2.at(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(y2.at(1) == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("layer_norm gradient vs finite differences on a random 8-vector") {
    Rng rng(21, 0);
    Tensor x = random_tensor({8}, rng);
    Tensor gain = random_tensor({8}, rng, 0.5, 1.5);
    Tensor bias = random_tensor({8}, rng, -0.2, 0.2);
    Tensor w = random_tensor({8}, rng);  // random cotangent

    auto f = [&](const Tensor& t) { return sum(mul(layer_norm(t, gain, bias, 1e-8), w)); };
    CHECK(grad_check(f, x, 1e-6) < 1e-5);

    auto f_gain = [&](const Tensor& g) { return sum(mul(layer_norm(x, g, bias, 1e-8), w)); };
    CHECK(grad_check(f_gain, gain, 1e-6) < 1e-5);
}

TEST_CASE("gumbel_softmax_hard eval argmax and single expert") {
    Rng rng(3, 0);
    Tensor logits = Tensor::from_vector({0.2, 0.7}, {2});
    Tensor pick_eval = gumbel_softmax_hard(logits, 1.0, rng, RunMode::Eval);
    CHECK(pick_eval.at(0) == 0.0);
    CHECK(pick_eval.at(1) == 1.0);

    Tensor one = Tensor::from_vector({0.3}, {1});
    CHECK(gumbel_softmax_hard(one, 1.0, rng, RunMode::Eval).at(0) == 1.0);
    CHECK(gumbel_softmax_hard(one, 1.0, rng, RunMode::Train).at(0) == 1.0);
}

TEST_CASE("gumbel_softmax_hard rejects non-positive temperature") {
    Rng rng(3, 0);
    Tensor logits = Tensor::from_vector({0.0, 1.0}, {2});
    CHECK_THROWS_AS(gumbel_softmax_hard(logits, 0.0, rng, RunMode::Train),
                    std::invalid_argument);
    CHECK_THROWS_AS(gumbel_softmax_hard(logits, -1.0, rng, RunMode::Eval),
                    std::invalid_argument);
}

TEST_CASE("gumbel_softmax_hard with dominant logit never flips over 10000 draws") {
    // Analytically P(flip) = 1/(1 + e^20) < 1e-8.
    Rng rng(77, 0);
    Tensor logits = Tensor::from_vector({10.0, -10.0}, {2});
    for (int i = 0; i < 10000; ++i) {
        Tensor out = gumbel_softmax_hard(logits, 1.0, rng, RunMode::Train);
        REQUIRE(out.at(0) == 1.0);
        REQUIRE(out.at(1) == 0.0);
    }
}

TEST_CASE("gumbel_softmax_hard output is exactly one-hot in both modes") {
    Rng rng(9, 0);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(5));
        Tensor logits = random_tensor({n}, rng, -3, 3);
        for (RunMode mode : {RunMode::Train, RunMode::Eval}) {
            Tensor out = gumbel_softmax_hard(logits, 0.7, rng, mode);
            int ones = 0;
            for (double v : out.data()) {
                CHECK((v == 0.0 || v == 1.0));
                if (v == 1.0) ++ones;
            }
            CHECK(ones == 1);
        }
    }
}

TEST_CASE("straight-through gradient equals the soft-path gradient") {
    Rng rng(13, 0);
    Tensor logits = random_tensor({4}, rng);
    std::vector<double> noise(4);
    for (double& g : noise) g = rng.gumbel();
    Tensor w = random_tensor({4}, rng);
    double tau = 0.9;

    Tensor probe = logits.detach();
    probe.set_requires_grad(true);
    sum(mul(gumbel_softmax_hard_with_noise(probe, noise, tau), w)).backward();

    // Soft surrogate from primitives: w . softmax((z + g) / tau).
    auto soft = [&](const Tensor& z) {
        return sum(mul(softmax(scale(add_const(z, noise), 1.0 / tau), 0), w));
    };
    CHECK(grad_check(soft, logits, 1e-6) < 1e-6);

    Tensor probe2 = logits.detach();
    probe2.set_requires_grad(true);
    soft(probe2).backward();
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(probe.grad()[i] == doctest::Approx(probe2.grad()[i]).epsilon(1e-12));
}

TEST_CASE("backward of sum gives ones; x*x at 3 gives 6; accumulation until zeroed") {
    Tensor x = Tensor::from_vector({1, -2, 5}, {3});
    x.set_requires_grad(true);
    sum(x).backward();
    for (double g : x.grad()) CHECK(g == 1.0);

    Tensor v = Tensor::scalar(3.0);
    v.set_requires_grad(true);
    mul(v, v).backward();
    CHECK(v.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
    mul(v, v).backward();
    CHECK(v.grad()[0] == doctest::Approx(12.0).epsilon(1e-15));
    v.zero_grad();
    mul(v, v).backward();
    CHECK(v.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("backward rejects non-scalar losses") {
    Tensor x = Tensor::from_vector({1, 2}, {2});
    x.set_requires_grad(true);
    Tensor y = relu(x);
    CHECK_THROWS_AS(y.backward(), std::invalid_argument);
}

TEST_CASE("detached tensor never accumulates gradient") {
    Tensor x = Tensor::scalar(2.0);
    x.set_requires_grad(true);
    Tensor d = x.detach();
    sum(mul(d, d)).backward();
    CHECK(!x.has_grad());
    CHECK(!d.has_grad());
}

TEST_CASE("grad_check oracles: sum, square, softmax-pick-first") {
    Rng rng(31, 0);
    Tensor x = random_tensor({6}, rng);
    CHECK(grad_check([](const Tensor& t) { return sum(t); }, x, 1e-6) < 1e-10);

    Tensor one = Tensor::scalar(1.0);
    CHECK(grad_check([](const Tensor& t) { return mul(t, t); }, one, 1e-5) < 1e-9);

    Tensor z = Tensor::from_vector({1, 2, 3}, {3});
    CHECK(grad_check([](const Tensor& t) { return pick(softmax(t, 0), 0); }, z, 1e-6) < 1e-6);
}

TEST_CASE("every differentiable op passes grad_check on randomized inputs") {
    Rng rng(101, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(4));
        // Feature dims >= 3: normalizing a 2-vector is scale-free, leaving
        // gradients near machine zero where central differences carry no
        // relative precision.
        int m = 3 + static_cast<int>(rng.uniform_int(4));
        Tensor a = random_tensor({n, m}, rng);
        Tensor b = random_tensor({m, n}, rng);
        Tensor v = random_tensor({m}, rng);
        Tensor w = random_tensor({n}, rng);
        Tensor gain = random_tensor({m}, rng, 0.5, 1.5);
        Tensor bias = random_tensor({m}, rng, -0.3, 0.3);
        // Offset away from the ReLU kink so central differences are valid.
        Tensor relu_in = random_tensor({n, m}, rng);
        for (double& x : relu_in.impl()->data)
            if (std::abs(x) < 0.05) x += 0.1;

        auto checks = {
            grad_check([&](const Tensor& t) { return sum(matmul(t, b)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return sum(matmul(a, t)); }, b, 1e-6),
            grad_check([&](const Tensor& t) { return sum(matvec(t, v)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return sum(matvec(a, t)); }, v, 1e-6),
            grad_check([&](const Tensor& t) { return sum(transpose(t)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return dot(t, v); }, v.detach(), 1e-6),
            grad_check([&](const Tensor& t) { return sum(relu(t)); }, relu_in, 1e-6),
            grad_check([&](const Tensor& t) { return sum(exp(t)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return sum(mul(softmax(t, 1), a)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return sum(mul(softmax(t, 0), v)); }, v, 1e-6),
            grad_check(
                [&](const Tensor& t) { return sum(mul(layer_norm(t, gain, bias, 1e-8), a)); },
                a, 1e-6),
            grad_check([&](const Tensor& t) { return logsumexp(t); }, v, 1e-6),
            grad_check([&](const Tensor& t) { return mean(t); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return sum(row(t, 0)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return pick(t, 1); }, v, 1e-6),
            grad_check([&](const Tensor& t) { return sum(slice_cols(t, 1, m - 1)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return sum(add_rowvec(t, v)); }, a, 1e-6),
            grad_check([&](const Tensor& t) { return sum(add_rowvec(a, t)); }, v, 1e-6),
            grad_check([&](const Tensor& t) { return sum(scale_by(t, Tensor::scalar(1.3))); }, a,
                       1e-6),
            grad_check([&](const Tensor& t) { return sum(mul(t, w)); }, w.detach(), 1e-6),
        };
        for (double err : checks) worst = std::max(worst, err);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("identical seed and stream give bitwise identical draws and ops") {
    Rng a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(42, 7), d(42, 7);
    for (int i = 0; i < 100; ++i) {
        CHECK(c.normal() == d.normal());
        CHECK(c.gumbel() == d.gumbel());
    }
    Rng e(42, 8);
    Rng f(42, 7);
    bool all_same = true;
    for (int i = 0; i < 16; ++i) all_same = all_same && (e.next_u64() == f.next_u64());
    CHECK(!all_same);

    Rng g1(5, 1), g2(5, 1);
    Tensor logits = Tensor::from_vector({0.1, -0.2, 0.3}, {3});
    for (int i = 0; i < 50; ++i) {
        Tensor o1 = gumbel_softmax_hard(logits, 1.0, g1, RunMode::Train);
        Tensor o2 = gumbel_softmax_hard(logits, 1.0, g2, RunMode::Train);
        for (int j = 0; j < 3; ++j) CHECK(o1.at(j) == o2.at(j));
    }
}
