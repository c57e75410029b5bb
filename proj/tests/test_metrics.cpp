#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "taser/metrics.hpp"
#include "taser/rng.hpp"

using namespace taser;

namespace {

/// Literal-summation nDCG oracle, written independently of the library.
double ndcg_oracle(const RankedList& ranked, const QrelSet& qrels, int k) {
    auto it = qrels.grades.find(ranked.query_id);
    std::map<int, int> grades = it == qrels.grades.end() ? std::map<int, int>{} : it->second;
    double dcg = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(ranked.items.size()); ++i) {
        int rel = 0;
        auto g = grades.find(ranked.items[static_cast<std::size_t>(i)].doc_id);
        if (g != grades.end()) rel = g->second;
        dcg += (std::pow(2.0, rel) - 1.0) / (std::log(i + 2.0) / std::log(2.0));
    }
    std::vector<int> rels;
    for (auto& [doc, rel] : grades) rels.push_back(rel);
    std::sort(rels.begin(), rels.end(), std::greater<int>());
    double idcg = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(rels.size()); ++i)
        idcg += (std::pow(2.0, rels[static_cast<std::size_t>(i)]) - 1.0) /
                (std::log(i + 2.0) / std::log(2.0));
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

Corpus simple_corpus() {
    Corpus corpus;
    corpus.passages.push_back({0, "Alpha", "the capital of france is paris"});
    corpus.passages.push_back({1, "Beta", "bananas are yellow fruit"});
    corpus.passages.push_back({2, "Gamma", "mount everest is the tallest peak"});
    corpus.passages.push_back({3, "", "assorted   Whitespace\tand CASE text"});
    return corpus;
}

}  // namespace

TEST_CASE("normalize_text lowercases, collapses whitespace, trims") {
    CHECK(normalize_text("  Hello   WORLD \t x ") == "hello world x");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text("a") == "a");
}

TEST_CASE("recall_at_k hits and misses") {
    Corpus corpus = simple_corpus();
    RankedList ranked;
    ranked.query_id = 0;
    ranked.items = {{0, 3.0}, {1, 2.0}, {2, 1.0}};

    std::vector<std::string> answers{"Paris"};
    for (int k = 1; k <= 3; ++k) CHECK(recall_at_k(ranked, answers, corpus, k) == 1.0);

    std::vector<std::string> missing{"london"};
    CHECK(recall_at_k(ranked, missing, corpus, 3) == 0.0);

    // Whitespace/case-normalized substring matching.
    RankedList ws;
    ws.items = {{3, 1.0}};
    std::vector<std::string> spaced{"whitespace  AND case"};
    CHECK(recall_at_k(ws, spaced, corpus, 1) == 1.0);

    // Answer at rank 2 is invisible at k = 1.
    RankedList deep;
    deep.items = {{1, 3.0}, {0, 2.0}};
    CHECK(recall_at_k(deep, answers, corpus, 1) == 0.0);
    CHECK(recall_at_k(deep, answers, corpus, 2) == 1.0);

    CHECK_THROWS_AS(recall_at_k(ranked, answers, corpus, 0), std::invalid_argument);
}

TEST_CASE("recall is monotone non-decreasing in k, by brute-force recomputation") {
    Rng rng(1, 0);
    Corpus corpus;
    for (int i = 0; i < 20; ++i)
        corpus.passages.push_back({i, "", "token" + std::to_string(i) + " body"});
    for (int trial = 0; trial < 100; ++trial) {
        RankedList ranked;
        std::vector<int> ids(20);
        for (int i = 0; i < 20; ++i) ids[static_cast<std::size_t>(i)] = i;
        rng.shuffle(ids);
        int depth = 1 + static_cast<int>(rng.uniform_int(20));
        for (int i = 0; i < depth; ++i)
            ranked.items.push_back({ids[static_cast<std::size_t>(i)], 100.0 - i});
        std::vector<std::string> answers{"token" + std::to_string(rng.uniform_int(20))};
        double prev = 0.0;
        for (int k = 1; k <= 20; ++k) {
            double r = recall_at_k(ranked, answers, corpus, k);
            CHECK(r >= prev);
            prev = r;
        }
    }
}

TEST_CASE("recall dataset summary excludes queries without answers") {
    Corpus corpus = simple_corpus();
    std::vector<RankedList> lists(2);
    lists[0].query_id = 0;
    lists[0].items = {{0, 1.0}};
    lists[1].query_id = 99;  // not in the answer set
    lists[1].items = {{1, 1.0}};
    AnswerSet answers;
    answers.answers[0] = {"paris"};
    EvalSummary summary = recall_at_k(lists, answers, corpus, 1);
    CHECK(summary.num_queries == 1);
    CHECK(summary.score == 1.0);
}

TEST_CASE("ndcg hand values") {
    QrelSet qrels;
    qrels.grades[0] = {{10, 2}, {11, 1}, {12, 1}};

    // Perfect ranking of all relevant items.
    RankedList perfect;
    perfect.query_id = 0;
    perfect.items = {{10, 3.0}, {11, 2.0}, {12, 1.0}};
    CHECK(ndcg_at_k(perfect, qrels, 10) == doctest::Approx(1.0).epsilon(1e-12));

    // Single relevant (grade 1) at rank 2, k = 10: 1/log2(3).
    QrelSet single;
    single.grades[1] = {{5, 1}};
    RankedList ranked;
    ranked.query_id = 1;
    ranked.items = {{9, 2.0}, {5, 1.0}};
    CHECK(ndcg_at_k(ranked, single, 10) ==
          doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
    CHECK(ndcg_at_k(ranked, single, 10) == doctest::Approx(0.630930).epsilon(1e-5));

    // Empty ranked list with nonempty qrels.
    RankedList empty;
    empty.query_id = 0;
    CHECK(ndcg_at_k(empty, qrels, 10) == 0.0);

    // All-zero grades score 0 by convention.
    QrelSet zeros;
    zeros.grades[2] = {{1, 0}, {2, 0}};
    RankedList anything;
    anything.query_id = 2;
    anything.items = {{1, 1.0}};
    CHECK(ndcg_at_k(anything, zeros, 10) == 0.0);
}

TEST_CASE("ndcg matches the brute-force oracle on 1000 randomized instances") {
    Rng rng(2, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        QrelSet qrels;
        int judged = static_cast<int>(rng.uniform_int(8));
        for (int i = 0; i < judged; ++i)
            qrels.grades[0][static_cast<int>(rng.uniform_int(15))] =
                static_cast<int>(rng.uniform_int(4));
        RankedList ranked;
        ranked.query_id = 0;
        int depth = static_cast<int>(rng.uniform_int(12));
        std::vector<int> pool(15);
        for (int i = 0; i < 15; ++i) pool[static_cast<std::size_t>(i)] = i;
        rng.shuffle(pool);
        for (int i = 0; i < depth; ++i)
            ranked.items.push_back({pool[static_cast<std::size_t>(i)], 50.0 - i});
        int k = 1 + static_cast<int>(rng.uniform_int(12));
        double lib = ndcg_at_k(ranked, qrels, k);
        double oracle = ndcg_oracle(ranked, qrels, k);
        CHECK(std::abs(lib - oracle) < 1e-12);
        CHECK(lib >= 0.0);
        CHECK(lib <= 1.0 + 1e-12);
    }
}

TEST_CASE("metrics are invariant to order-preserving score scaling") {
    Rng rng(3, 0);
    Corpus corpus;
    for (int i = 0; i < 10; ++i)
        corpus.passages.push_back({i, "", "token" + std::to_string(i)});
    QrelSet qrels;
    qrels.grades[0] = {{2, 2}, {5, 1}};
    RankedList ranked;
    ranked.query_id = 0;
    ranked.items = {{5, 4.0}, {2, 3.0}, {8, 2.0}, {1, 1.0}};
    std::vector<std::string> answers{"token2"};

    RankedList scaled = ranked;
    for (ScoredDoc& item : scaled.items) item.score = item.score * 17.0 + 3.0;
    CHECK(ndcg_at_k(ranked, qrels, 3) == ndcg_at_k(scaled, qrels, 3));
    CHECK(recall_at_k(ranked, answers, corpus, 2) == recall_at_k(scaled, answers, corpus, 2));
}

TEST_CASE("aggregate micro and macro") {
    std::vector<double> scores{1.0, 1.0, 0.0};
    std::vector<std::string> groups{"A", "A", "B"};
    CHECK(aggregate(scores, nullptr, AggregateMode::Micro) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(aggregate(scores, &groups, AggregateMode::Macro) ==
          doctest::Approx(0.5).epsilon(1e-12));

    // One group: micro == macro.
    std::vector<std::string> one_group{"g", "g", "g"};
    CHECK(aggregate(scores, &one_group, AggregateMode::Macro) ==
          doctest::Approx(aggregate(scores, nullptr, AggregateMode::Micro)).epsilon(1e-12));

    CHECK_THROWS_AS(aggregate(scores, nullptr, AggregateMode::Macro), std::invalid_argument);
    std::vector<double> empty;
    CHECK_THROWS_AS(aggregate(empty, nullptr, AggregateMode::Micro), std::invalid_argument);
}

TEST_CASE("singleton groups make macro equal micro") {
    Rng rng(4, 0);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(20));
        std::vector<double> scores;
        std::vector<std::string> groups;
        for (int i = 0; i < n; ++i) {
            scores.push_back(rng.uniform());
            groups.push_back("q" + std::to_string(i));
        }
        double micro = aggregate(scores, nullptr, AggregateMode::Micro);
        double macro = aggregate(scores, &groups, AggregateMode::Macro);
        CHECK(micro == doctest::Approx(macro).epsilon(1e-12));
    }
}

TEST_CASE("qrels parse and reject malformed lines") {
    std::string path = "/tmp/taser_test_qrels.txt";
    {
        std::ofstream out(path);
        out << "0 0 10 2\n0 0 11 1\n3 0 9 0\n";
    }
    QrelSet qrels = read_qrels(path);
    CHECK(qrels.grades.at(0).at(10) == 2);
    CHECK(qrels.grades.at(0).at(11) == 1);
    CHECK(qrels.grades.at(3).at(9) == 0);
    {
        std::ofstream out(path);
        out << "0 0 ten 2\n";
    }
    CHECK_THROWS_AS(read_qrels(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("recall with k = corpus size hits whenever any passage contains an answer") {
    Rng rng(5, 0);
    Corpus corpus;
    for (int i = 0; i < 8; ++i)
        corpus.passages.push_back({i, "", "word" + std::to_string(i)});
    for (int trial = 0; trial < 30; ++trial) {
        RankedList full;
        std::vector<int> ids(8);
        for (int i = 0; i < 8; ++i) ids[static_cast<std::size_t>(i)] = i;
        rng.shuffle(ids);
        for (int i = 0; i < 8; ++i) full.items.push_back({ids[static_cast<std::size_t>(i)], 8.0 - i});
        int target = static_cast<int>(rng.uniform_int(8));
        std::vector<std::string> answers{"word" + std::to_string(target)};
        CHECK(recall_at_k(full, answers, corpus, 8) == 1.0);
    }
}
