#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <vector>

#include "taser/checkpoint.hpp"
#include "taser/data.hpp"
#include "taser/dense.hpp"
#include "taser/objective.hpp"

using namespace taser;

namespace {

DenseIndex random_index(Rng& rng, int rows, int dim) {
    DenseIndex index;
    index.dim = dim;
    index.vectors.resize(static_cast<std::size_t>(rows) * dim);
    for (double& v : index.vectors) v = -1.0 + 2.0 * rng.uniform();
    return index;
}

/// Full scoring oracle: dot every row, stable-sort by (score desc, id asc).
RankedList brute_force_dense(const DenseIndex& index, std::span<const double> q, int k) {
    RankedList out;
    for (std::size_t i = 0; i < index.num_rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < index.dim; ++j)
            s += q[static_cast<std::size_t>(j)] * index.row(i)[static_cast<std::size_t>(j)];
        out.items.push_back({static_cast<int>(i), s});
    }
    std::stable_sort(out.items.begin(), out.items.end(),
                     [](const ScoredDoc& a, const ScoredDoc& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.doc_id < b.doc_id;
                     });
    if (static_cast<int>(out.items.size()) > k) out.items.resize(static_cast<std::size_t>(k));
    return out;
}

EncoderConfig small_config(int vocab) {
    EncoderConfig cfg;
    cfg.vocab_size = vocab;
    cfg.max_positions = 32;
    cfg.d_model = 8;
    cfg.ffn_inner = 16;
    cfg.num_heads = 2;
    cfg.num_blocks = 3;
    cfg.interleave_period = 2;
    cfg.num_experts = 2;
    cfg.routing = RoutingKind::Det;
    return cfg;
}

Corpus word_corpus(int n) {
    Corpus corpus;
    for (int i = 0; i < n; ++i)
        corpus.passages.push_back(
            {i, "doc " + std::to_string(i), "key" + std::to_string(i) + " shared filler"});
    return corpus;
}

}  // namespace

TEST_CASE("embed_corpus shape and determinism") {
    Corpus corpus = word_corpus(9);
    Vocab vocab = Vocab::build(corpus);
    Rng rng(1, 0);
    TaserEncoder enc = init_encoder(small_config(vocab.size()), rng);

    DenseIndex a = embed_corpus(enc, vocab, corpus);
    CHECK(a.dim == 8);
    CHECK(a.num_rows() == 9);
    DenseIndex b = embed_corpus(enc, vocab, corpus);
    CHECK(a.vectors == b.vectors);
    CHECK(a.fingerprint == b.fingerprint);
}

TEST_CASE("parallel embedding equals the serial oracle") {
    Corpus corpus = word_corpus(23);
    Vocab vocab = Vocab::build(corpus);
    Rng rng(2, 0);
    TaserEncoder enc = init_encoder(small_config(vocab.size()), rng);

    DenseIndex serial = embed_corpus(enc, vocab, corpus, 1);
    DenseIndex parallel = embed_corpus(enc, vocab, corpus, 4);
    CHECK(serial.vectors == parallel.vectors);
}

TEST_CASE("dense_topk: zero query ties break by ascending id") {
    Rng rng(3, 0);
    DenseIndex index = random_index(rng, 12, 4);
    std::vector<double> zero(4, 0.0);
    RankedList out = dense_topk(index, zero, 5);
    REQUIRE(out.items.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(out.items[static_cast<std::size_t>(i)].doc_id == i);
        CHECK(out.items[static_cast<std::size_t>(i)].score == 0.0);
    }
}

TEST_CASE("dense_topk contract: inner product is not nearest neighbor") {
    // A row with a larger norm can outrank the query's own row.
    DenseIndex index;
    index.dim = 2;
    index.vectors = {1, 0, 10, 0};
    std::vector<double> q{1, 0};
    RankedList out = dense_topk(index, q, 2);
    CHECK(out.items[0].doc_id == 1);  // 10 > 1
    CHECK(out.items[0].score == 10.0);
}

TEST_CASE("dense_topk dimension mismatch") {
    Rng rng(4, 0);
    DenseIndex index = random_index(rng, 3, 4);
    std::vector<double> q(5, 0.0);
    CHECK_THROWS_AS(dense_topk(index, q, 2), std::invalid_argument);
    std::vector<double> q4(4, 0.0);
    CHECK_THROWS_AS(dense_topk(index, q4, 0), std::invalid_argument);
}

TEST_CASE("dense_topk equals the brute-force oracle on 100 random instances") {
    Rng rng(5, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int rows = 1 + static_cast<int>(rng.uniform_int(40));
        int dim = 1 + static_cast<int>(rng.uniform_int(8));
        DenseIndex index = random_index(rng, rows, dim);
        std::vector<double> q(static_cast<std::size_t>(dim));
        for (double& v : q) v = -1.0 + 2.0 * rng.uniform();
        int k = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(rows + 3)));
        RankedList fast = dense_topk(index, q, k);
        RankedList oracle = brute_force_dense(index, q, k);
        REQUIRE(fast.items.size() == oracle.items.size());
        for (std::size_t i = 0; i < fast.items.size(); ++i) {
            CHECK(fast.items[i].doc_id == oracle.items[i].doc_id);
            CHECK(fast.items[i].score == oracle.items[i].score);
        }
    }
}

TEST_CASE("hybrid_rank with alpha = 0 reproduces the dense order on the union") {
    Rng rng(6, 0);
    for (int trial = 0; trial < 50; ++trial) {
        RankedList dense, sparse;
        dense.query_id = sparse.query_id = trial;
        int nd = 1 + static_cast<int>(rng.uniform_int(8));
        int ns = 1 + static_cast<int>(rng.uniform_int(8));
        for (int i = 0; i < nd; ++i) dense.items.push_back({i, rng.uniform()});
        for (int i = 0; i < ns; ++i) sparse.items.push_back({static_cast<int>(rng.uniform_int(12)), rng.uniform()});
        canonical_sort(dense.items);
        canonical_sort(sparse.items);
        // de-dup sparse ids
        std::vector<ScoredDoc> dedup;
        std::set<int> seen;
        for (auto& it : sparse.items)
            if (seen.insert(it.doc_id).second) dedup.push_back(it);
        sparse.items = dedup;

        RankedList fused = hybrid_rank(dense, sparse, 0.0, 100);
        // Oracle: normalize dense over union, sort canonically.
        std::set<int> union_ids;
        for (auto& it : dense.items) union_ids.insert(it.doc_id);
        for (auto& it : sparse.items) union_ids.insert(it.doc_id);
        double lo = HUGE_VAL, hi = -HUGE_VAL;
        for (auto& it : dense.items) {
            lo = std::min(lo, it.score);
            hi = std::max(hi, it.score);
        }
        std::vector<ScoredDoc> expected;
        for (int id : union_ids) {
            double raw = lo;
            for (auto& it : dense.items)
                if (it.doc_id == id) raw = it.score;
            double norm = (hi == lo) ? 0.0 : (raw - lo) / (hi - lo);
            expected.push_back({id, norm});
        }
        canonical_sort(expected);
        REQUIRE(fused.items.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(fused.items[i].doc_id == expected[i].doc_id);
            CHECK(fused.items[i].score == doctest::Approx(expected[i].score).epsilon(1e-12));
        }
    }
}

TEST_CASE("hybrid_rank preserves the shared order when both arms agree") {
    RankedList dense;
    dense.items = {{3, 9.0}, {1, 5.0}, {7, 2.0}};
    RankedList sparse;
    sparse.items = {{3, 80.0}, {1, 40.0}, {7, 10.0}};
    for (double alpha : {0.0, 0.5, 1.0, 1.7, 2.0}) {
        RankedList fused = hybrid_rank(dense, sparse, alpha, 3);
        REQUIRE(fused.items.size() == 3);
        CHECK(fused.items[0].doc_id == 3);
        CHECK(fused.items[1].doc_id == 1);
        CHECK(fused.items[2].doc_id == 7);
    }
}

TEST_CASE("hybrid_rank: hand-normalized two-candidate tie breaks by id") {
    RankedList dense;
    dense.query_id = 4;
    dense.items = {{0, 2.0}, {1, 1.0}};  // A=2, B=1
    RankedList sparse;
    sparse.query_id = 4;
    sparse.items = {{1, 3.0}, {0, 0.0}};  // A=0, B=3
    RankedList fused = hybrid_rank(dense, sparse, 1.0, 2);
    // Normalized: A -> (1, 0), B -> (0, 1); combined scores tie at 1.
    REQUIRE(fused.items.size() == 2);
    CHECK(fused.items[0].doc_id == 0);
    CHECK(fused.items[1].doc_id == 1);
    CHECK(fused.items[0].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fused.items[1].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fused.query_id == 4);
}

TEST_CASE("hybrid_rank guards: empty union, constant arms normalize to zero") {
    RankedList empty_a, empty_b;
    CHECK(hybrid_rank(empty_a, empty_b, 1.0, 5).items.empty());

    RankedList constant;
    constant.items = {{0, 7.0}, {1, 7.0}, {2, 7.0}};
    RankedList other;
    other.items = {{1, 1.0}, {2, 3.0}};
    RankedList fused = hybrid_rank(constant, other, 0.0, 3);
    for (const ScoredDoc& item : fused.items) CHECK(item.score == 0.0);
    // With all-zero combined scores the order is ascending ids.
    CHECK(fused.items[0].doc_id == 0);
    CHECK(fused.items[1].doc_id == 1);
    CHECK(fused.items[2].doc_id == 2);
}

TEST_CASE("hybrid_rank: a candidate missing from one arm takes that arm's minimum") {
    RankedList dense;
    dense.items = {{0, 4.0}, {1, 2.0}};
    RankedList sparse;
    sparse.items = {{2, 10.0}, {0, 5.0}};
    RankedList fused = hybrid_rank(dense, sparse, 1.0, 3);
    // id 2 is missing from dense: its dense part is 0. id 1 missing from
    // sparse: its sparse part is 0.
    double score_of_2 = -1, score_of_1 = -1;
    for (auto& it : fused.items) {
        if (it.doc_id == 2) score_of_2 = it.score;
        if (it.doc_id == 1) score_of_1 = it.score;
    }
    CHECK(score_of_2 == doctest::Approx(1.0).epsilon(1e-12));  // 0 + 1.0 * 1
    CHECK(score_of_1 == doctest::Approx(0.0).epsilon(1e-12));  // 0 + 1.0 * 0
}

TEST_CASE("tune_alpha: 16-point grid, tie rule, perfect-sparse instance") {
    Corpus corpus = word_corpus(6);
    AnswerSet answers;
    std::vector<RankedList> dense, sparse;
    for (int q = 0; q < 4; ++q) {
        answers.answers[q] = {"key" + std::to_string(q)};
        RankedList d, s;
        d.query_id = s.query_id = q;
        // Sparse is perfect: gold first. Dense is wrong: gold last.
        s.items = {{q, 10.0}, {(q + 1) % 6, 5.0}, {(q + 2) % 6, 1.0}};
        d.items = {{(q + 1) % 6, 9.0}, {(q + 2) % 6, 8.0}, {q, 1.0}};
        dense.push_back(d);
        sparse.push_back(s);
    }
    AlphaResult result = tune_alpha(dense, sparse, answers, corpus, 1);
    CHECK(result.grid.size() == 16);
    CHECK(result.grid.front().alpha == doctest::Approx(0.5));
    CHECK(result.grid.back().alpha == doctest::Approx(2.0));
    for (std::size_t i = 1; i < result.grid.size(); ++i)
        CHECK(result.grid[i].alpha - result.grid[i - 1].alpha == doctest::Approx(0.1).epsilon(1e-9));

    // Exhaustive check of the argmax/tie rule against the reported grid.
    double best = -1.0, best_alpha = 0.0;
    for (const AlphaPoint& p : result.grid)
        if (p.score > best) {
            best = p.score;
            best_alpha = p.alpha;
        }
    CHECK(result.best_alpha == doctest::Approx(best_alpha));
    CHECK(result.best_score == doctest::Approx(best));
    CHECK(result.best_score == doctest::Approx(1.0));  // sparse wins at some alpha

    // Constant metric in alpha: smallest grid point wins.
    std::vector<RankedList> same_d = sparse, same_s = sparse;
    AlphaResult flat = tune_alpha(same_d, same_s, answers, corpus, 1);
    CHECK(flat.best_alpha == doctest::Approx(0.5));
}

TEST_CASE("trec run files round-trip rankings") {
    Rng rng(7, 0);
    std::vector<RankedList> lists;
    for (int q = 0; q < 3; ++q) {
        RankedList list;
        list.query_id = q * 10;
        for (int i = 0; i < 4; ++i)
            list.items.push_back({i + q, 10.0 - i - 0.125 * q});
        lists.push_back(list);
    }
    std::string path = "/tmp/taser_test_run.trec";
    write_trec_run(path, lists, "testrun");
    std::vector<RankedList> loaded = read_trec_run(path);
    REQUIRE(loaded.size() == lists.size());
    for (std::size_t i = 0; i < lists.size(); ++i) {
        CHECK(loaded[i].query_id == lists[i].query_id);
        REQUIRE(loaded[i].items.size() == lists[i].items.size());
        for (std::size_t j = 0; j < lists[i].items.size(); ++j) {
            CHECK(loaded[i].items[j].doc_id == lists[i].items[j].doc_id);
            CHECK(loaded[i].items[j].score ==
                  doctest::Approx(lists[i].items[j].score).epsilon(1e-9));
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("dense index persists with its fingerprint") {
    Corpus corpus = word_corpus(7);
    Vocab vocab = Vocab::build(corpus);
    Rng rng(8, 0);
    TaserEncoder enc = init_encoder(small_config(vocab.size()), rng);
    DenseIndex index = embed_corpus(enc, vocab, corpus);

    std::string path = "/tmp/taser_test_dense.idx";
    save_dense_index(path, index);
    DenseIndex loaded = load_dense_index(path);
    CHECK(loaded.dim == index.dim);
    CHECK(loaded.fingerprint == index.fingerprint);
    CHECK(loaded.vectors == index.vectors);
    CHECK(loaded.fingerprint == encoder_fingerprint(enc, vocab));

    // A different encoder does not match the stored fingerprint.
    Rng rng2(9, 0);
    TaserEncoder other = init_encoder(small_config(vocab.size()), rng2);
    CHECK(encoder_fingerprint(other, vocab) != loaded.fingerprint);
    std::remove(path.c_str());
}
