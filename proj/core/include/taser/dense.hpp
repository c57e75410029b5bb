#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taser/data.hpp"
#include "taser/encoder.hpp"
#include "taser/metrics.hpp"
#include "taser/ranking.hpp"

namespace taser {

/// Row-per-passage matrix of eval-mode CLS vectors, bound to the encoder
/// that produced it by a fingerprint so stale indexes are refused.
struct DenseIndex {
    int dim = 0;
    std::uint64_t fingerprint = 0;
    std::vector<double> vectors;  // row-major, row i <-> passage id i

    std::size_t num_rows() const {
        return dim == 0 ? 0 : vectors.size() / static_cast<std::size_t>(dim);
    }
    std::span<const double> row(std::size_t i) const {
        return {vectors.data() + i * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

/// Embeds every corpus passage (InputKind::Passage, eval mode). Workers
/// split the id range; the output is identical for any worker count.
DenseIndex embed_corpus(const TaserEncoder& enc, const Vocab& vocab, const Corpus& corpus,
                        int num_threads = 1);

/// Eval-mode question vector as plain doubles.
std::vector<double> encode_query(const TaserEncoder& enc, const Vocab& vocab,
                                 const std::string& question);

/// Exact top-k by inner product over all rows; ties by ascending id.
RankedList dense_topk(const DenseIndex& index, std::span<const double> query, int k,
                      int query_id = 0);

/// Fuses two candidate lists: min-max normalizes each arm's scores over the
/// union (a candidate missing from an arm takes that arm's minimum, i.e. 0
/// after normalization; a constant arm normalizes to all zeros), combines
/// as dense + alpha * sparse, and returns the top k.
RankedList hybrid_rank(const RankedList& dense, const RankedList& sparse, double alpha, int k);

struct AlphaPoint {
    double alpha = 0.0;
    double score = 0.0;
};

struct AlphaResult {
    double best_alpha = 0.0;
    double best_score = 0.0;
    std::vector<AlphaPoint> grid;  // the 16-point grid 0.5, 0.6, ..., 2.0
};

/// Grid search of the hybrid weight on a dev set, scored by answer recall
/// at k over the fused top-k lists; ties take the smallest alpha.
AlphaResult tune_alpha(std::span<const RankedList> dense_lists,
                       std::span<const RankedList> sparse_lists, const AnswerSet& answers,
                       const Corpus& corpus, int k);

void save_dense_index(const std::string& path, const DenseIndex& index);
DenseIndex load_dense_index(const std::string& path);

}  // namespace taser
