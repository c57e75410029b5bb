#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taser/data.hpp"
#include "taser/ranking.hpp"

namespace taser {

/// Lowercase, split on non-alphanumeric, drop empties. Duplicates are
/// preserved; term frequency is computed at index time.
std::vector<std::string> analyze(std::string_view text);

struct Posting {
    int doc_id = 0;
    int tf = 0;
};

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

/// Classic inverted index over a passage collection with BM25 scoring in
/// the Lucene parameterization: idf(t) = ln(1 + (N - n_t + 0.5)/(n_t + 0.5)),
/// query terms deduplicated, scores always nonnegative.
class InvertedIndex {
public:
    static InvertedIndex build(const Corpus& corpus);

    std::size_t num_docs() const { return doc_len_.size(); }
    double avg_doc_len() const { return avgdl_; }
    const std::vector<Posting>* postings(std::string_view term) const;
    int doc_len(int doc_id) const;

    double score(std::span<const std::string> query_terms, int doc_id,
                 const Bm25Params& params = {}) const;
    /// Top-k passages matching at least one query term, canonical order.
    RankedList topk(std::string_view query, int k, const Bm25Params& params = {},
                    int query_id = 0) const;

    void save(const std::string& path) const;
    static InvertedIndex load(const std::string& path);

    bool operator==(const InvertedIndex& other) const;

private:
    double idf(std::string_view term) const;

    std::map<std::string, std::vector<Posting>> postings_;  // ordered for stable persistence
    std::vector<int> doc_len_;
    double avgdl_ = 0.0;
};

}  // namespace taser
