#pragma once

#include <span>
#include <string>
#include <vector>

namespace taser {

struct ScoredDoc {
    int doc_id = 0;
    double score = 0.0;
};

/// Retrieval result for one query: (passage id, score) pairs ordered by
/// score descending, ties broken by ascending id, no duplicates.
struct RankedList {
    int query_id = 0;
    std::vector<ScoredDoc> items;
};

/// Sorts in place into the canonical (score desc, id asc) order.
void canonical_sort(std::vector<ScoredDoc>& items);

/// Standard six-column run format: `qid Q0 docid rank score tag`.
void write_trec_run(const std::string& path, std::span<const RankedList> lists,
                    const std::string& tag);
std::vector<RankedList> read_trec_run(const std::string& path);

}  // namespace taser
