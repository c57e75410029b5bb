#include "taser/dense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include "taser/checkpoint.hpp"
#include "taser/objective.hpp"

namespace taser {

DenseIndex embed_corpus(const TaserEncoder& enc, const Vocab& vocab, const Corpus& corpus,
                        int num_threads) {
    if (num_threads < 1) num_threads = 1;
    const int d = enc.config.d_model;
    DenseIndex index;
    index.dim = d;
    index.fingerprint = encoder_fingerprint(enc, vocab);
    index.vectors.assign(corpus.size() * static_cast<std::size_t>(d), 0.0);

    auto worker = [&](std::size_t begin, std::size_t end) {
        NoGradGuard no_grad;
        Rng unused(0, 0);  // eval mode draws nothing
        for (std::size_t i = begin; i < end; ++i) {
            const CorpusRecord& rec = corpus.passages[i];
            try {
                std::vector<int> ids =
                    vocab.encode(corpus.full_text(rec.id), enc.config.max_positions);
                Tensor cls = encode(enc, ids, InputKind::Passage, RunMode::Eval, unused).cls;
                std::copy_n(cls.data().data(), d,
                            index.vectors.data() + static_cast<std::size_t>(rec.id) * d);
            } catch (const std::exception& e) {
                throw std::runtime_error("embed: passage " + std::to_string(rec.id) + ": " +
                                         e.what());
            }
        }
    };

    if (num_threads == 1 || corpus.size() < 2) {
        worker(0, corpus.size());
        return index;
    }
    std::size_t chunk = (corpus.size() + static_cast<std::size_t>(num_threads) - 1) /
                        static_cast<std::size_t>(num_threads);
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(num_threads));
    for (int t = 0; t < num_threads; ++t) {
        std::size_t begin = static_cast<std::size_t>(t) * chunk;
        std::size_t end = std::min(begin + chunk, corpus.size());
        if (begin >= end) break;
        threads.emplace_back([&, t, begin, end] {
            try {
                worker(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (std::thread& th : threads) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
    return index;
}

std::vector<double> encode_query(const TaserEncoder& enc, const Vocab& vocab,
                                 const std::string& question) {
    NoGradGuard no_grad;
    Rng unused(0, 0);
    std::vector<int> ids = vocab.encode(question, enc.config.max_positions);
    Tensor cls = encode(enc, ids, InputKind::Question, RunMode::Eval, unused).cls;
    return {cls.data().begin(), cls.data().end()};
}

RankedList dense_topk(const DenseIndex& index, std::span<const double> query, int k,
                      int query_id) {
    if (k < 1) throw std::invalid_argument("dense_topk: k must be >= 1");
    if (static_cast<int>(query.size()) != index.dim)
        throw std::invalid_argument("dense_topk: query dimension " +
                                    std::to_string(query.size()) + " vs index dimension " +
                                    std::to_string(index.dim));
    // Bounded worst-first heap; (score asc, id desc) on top so eviction
    // keeps canonical winners.
    auto worse = [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    };
    std::vector<ScoredDoc> heap;
    std::size_t rows = index.num_rows();
    std::size_t kk = static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = sim(query, index.row(i));
        ScoredDoc cand{static_cast<int>(i), s};
        if (heap.size() < kk) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end(), worse);
        } else if (worse(cand, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), worse);
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end(), worse);
        }
    }
    RankedList out;
    out.query_id = query_id;
    out.items = std::move(heap);
    canonical_sort(out.items);
    return out;
}

namespace {

std::map<int, double> normalized_over_union(const RankedList& list,
                                            const std::vector<int>& union_ids) {
    std::map<int, double> raw;
    for (const ScoredDoc& item : list.items) raw[item.doc_id] = item.score;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (auto& [id, s] : raw) {
        if (first) {
            lo = hi = s;
            first = false;
        } else {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
    }
    std::map<int, double> norm;
    double span = hi - lo;
    for (int id : union_ids) {
        auto it = raw.find(id);
        double s = it == raw.end() ? lo : it->second;  // missing -> this arm's minimum
        norm[id] = (span == 0.0 || raw.empty()) ? 0.0 : (s - lo) / span;
    }
    return norm;
}

}  // namespace

RankedList hybrid_rank(const RankedList& dense, const RankedList& sparse, double alpha, int k) {
    std::map<int, bool> seen;
    std::vector<int> union_ids;
    for (const ScoredDoc& item : dense.items)
        if (!seen[item.doc_id]) {
            seen[item.doc_id] = true;
            union_ids.push_back(item.doc_id);
        }
    for (const ScoredDoc& item : sparse.items)
        if (!seen[item.doc_id]) {
            seen[item.doc_id] = true;
            union_ids.push_back(item.doc_id);
        }
    RankedList out;
    out.query_id = dense.query_id;
    if (union_ids.empty()) return out;

    std::map<int, double> nd = normalized_over_union(dense, union_ids);
    std::map<int, double> ns = normalized_over_union(sparse, union_ids);
    out.items.reserve(union_ids.size());
    for (int id : union_ids) out.items.push_back({id, nd[id] + alpha * ns[id]});
    canonical_sort(out.items);
    if (out.items.size() > static_cast<std::size_t>(k))
        out.items.resize(static_cast<std::size_t>(k));
    return out;
}

AlphaResult tune_alpha(std::span<const RankedList> dense_lists,
                       std::span<const RankedList> sparse_lists, const AnswerSet& answers,
                       const Corpus& corpus, int k) {
    if (dense_lists.size() != sparse_lists.size() || dense_lists.empty())
        throw std::invalid_argument("tune_alpha: dense and sparse runs must align and be nonempty");
    AlphaResult result;
    result.best_score = -1.0;
    for (int i = 0; i <= 15; ++i) {
        double alpha = static_cast<double>(5 + i) / 10.0;
        std::vector<RankedList> fused;
        fused.reserve(dense_lists.size());
        for (std::size_t q = 0; q < dense_lists.size(); ++q)
            fused.push_back(hybrid_rank(dense_lists[q], sparse_lists[q], alpha, k));
        double score = recall_at_k(fused, answers, corpus, k).score;
        result.grid.push_back({alpha, score});
        if (score > result.best_score) {  // strict: ties keep the smallest alpha
            result.best_score = score;
            result.best_alpha = alpha;
        }
    }
    return result;
}

// ---- persistence ------------------------------------------------------------------
// Layout: magic "TASRDN1\0" | u64 rows | u32 dim | u64 fingerprint | f64 data.

namespace {
constexpr char kMagic[8] = {'T', 'A', 'S', 'R', 'D', 'N', '1', '\0'};
}

void save_dense_index(const std::string& path, const DenseIndex& index) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dense index: " + path);
    out.write(kMagic, sizeof kMagic);
    std::uint64_t rows = index.num_rows();
    std::uint32_t dim = static_cast<std::uint32_t>(index.dim);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&index.fingerprint), sizeof index.fingerprint);
    out.write(reinterpret_cast<const char*>(index.vectors.data()),
              static_cast<std::streamsize>(index.vectors.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing dense index: " + path);
}

DenseIndex load_dense_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dense index: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kMagic))
        throw std::runtime_error(path + ": not a dense index file");
    std::uint64_t rows = 0;
    std::uint32_t dim = 0;
    DenseIndex index;
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&index.fingerprint), sizeof index.fingerprint);
    index.dim = static_cast<int>(dim);
    index.vectors.resize(rows * dim);
    in.read(reinterpret_cast<char*>(index.vectors.data()),
            static_cast<std::streamsize>(index.vectors.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated dense index file");
    return index;
}

}  // namespace taser
