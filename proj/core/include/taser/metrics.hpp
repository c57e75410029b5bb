#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taser/data.hpp"
#include "taser/ranking.hpp"

namespace taser {

/// Graded relevance judgments: query id -> passage id -> grade >= 0.
struct QrelSet {
    std::map<int, std::map<int, int>> grades;
};

/// Gold answer strings per query.
struct AnswerSet {
    std::map<int, std::vector<std::string>> answers;
};

AnswerSet answers_from_dataset(const Dataset& dataset);

/// `qid 0 docid grade` lines.
QrelSet read_qrels(const std::string& path);

/// Lowercased, whitespace runs collapsed to single spaces, trimmed.
std::string normalize_text(std::string_view text);

/// 1 if any of the top-k passages' text contains any answer string
/// (case-insensitive substring after whitespace normalization), else 0.
double recall_at_k(const RankedList& ranked, std::span<const std::string> answers,
                   const Corpus& corpus, int k);

/// DCG@k with gain 2^rel - 1 and log2(rank+1) discount, normalized by the
/// ideal ranking of all judged grades; all-zero grades score 0.
double ndcg_at_k(const RankedList& ranked, const QrelSet& qrels, int k);

struct EvalSummary {
    double score = 0.0;
    std::size_t num_queries = 0;
    std::map<int, double> per_query;
};

/// Dataset-level means. Queries missing from the answer set are excluded
/// with a warning on stderr.
EvalSummary recall_at_k(std::span<const RankedList> lists, const AnswerSet& answers,
                        const Corpus& corpus, int k);
EvalSummary ndcg_at_k(std::span<const RankedList> lists, const QrelSet& qrels, int k);

enum class AggregateMode { Micro, Macro };

/// Micro: mean over queries. Macro: mean of per-group means; requires a
/// group label per score.
double aggregate(std::span<const double> scores, const std::vector<std::string>* groups,
                 AggregateMode mode);

}  // namespace taser
