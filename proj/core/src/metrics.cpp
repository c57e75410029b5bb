#include "taser/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace taser {

AnswerSet answers_from_dataset(const Dataset& dataset) {
    AnswerSet out;
    for (const DatasetRecord& rec : dataset.records) out.answers[rec.id] = rec.answers;
    return out;
}

QrelSet read_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qrels file: " + path);
    QrelSet qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        int qid, zero, docid, grade;
        if (!(is >> qid >> zero >> docid >> grade) || grade < 0)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": malformed qrels record");
        qrels.grades[qid][docid] = grade;
    }
    return qrels;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = true;  // trims leading whitespace
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

double recall_at_k(const RankedList& ranked, std::span<const std::string> answers,
                   const Corpus& corpus, int k) {
    if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
    std::vector<std::string> needles;
    needles.reserve(answers.size());
    for (const std::string& a : answers) needles.push_back(normalize_text(a));
    std::size_t depth = std::min(static_cast<std::size_t>(k), ranked.items.size());
    for (std::size_t i = 0; i < depth; ++i) {
        std::string text = normalize_text(corpus.full_text(ranked.items[i].doc_id));
        for (const std::string& needle : needles)
            if (!needle.empty() && text.find(needle) != std::string::npos) return 1.0;
    }
    return 0.0;
}

double ndcg_at_k(const RankedList& ranked, const QrelSet& qrels, int k) {
    if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    auto it = qrels.grades.find(ranked.query_id);
    if (it == qrels.grades.end()) return 0.0;
    const std::map<int, int>& grades = it->second;
    auto gain = [](int rel) { return std::pow(2.0, static_cast<double>(rel)) - 1.0; };

    double dcg = 0.0;
    std::size_t depth = std::min(static_cast<std::size_t>(k), ranked.items.size());
    for (std::size_t i = 0; i < depth; ++i) {
        auto g = grades.find(ranked.items[i].doc_id);
        int rel = g == grades.end() ? 0 : g->second;
        dcg += gain(rel) / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> ideal;
    ideal.reserve(grades.size());
    for (auto& [doc, rel] : grades) ideal.push_back(rel);
    std::sort(ideal.rbegin(), ideal.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(static_cast<std::size_t>(k), ideal.size()); ++i)
        idcg += gain(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

EvalSummary recall_at_k(std::span<const RankedList> lists, const AnswerSet& answers,
                        const Corpus& corpus, int k) {
    EvalSummary summary;
    double total = 0.0;
    for (const RankedList& list : lists) {
        auto it = answers.answers.find(list.query_id);
        if (it == answers.answers.end() || it->second.empty()) {
            std::cerr << "warning: query " << list.query_id
                      << " has no gold answers, excluded from recall\n";
            continue;
        }
        double r = recall_at_k(list, it->second, corpus, k);
        summary.per_query[list.query_id] = r;
        total += r;
        ++summary.num_queries;
    }
    summary.score = summary.num_queries == 0 ? 0.0 : total / static_cast<double>(summary.num_queries);
    return summary;
}

EvalSummary ndcg_at_k(std::span<const RankedList> lists, const QrelSet& qrels, int k) {
    EvalSummary summary;
    double total = 0.0;
    for (const RankedList& list : lists) {
        double s = ndcg_at_k(list, qrels, k);
        summary.per_query[list.query_id] = s;
        total += s;
        ++summary.num_queries;
    }
    summary.score = summary.num_queries == 0 ? 0.0 : total / static_cast<double>(summary.num_queries);
    return summary;
}

double aggregate(std::span<const double> scores, const std::vector<std::string>* groups,
                 AggregateMode mode) {
    if (scores.empty()) throw std::invalid_argument("aggregate: no scores");
    if (mode == AggregateMode::Micro) {
        double total = 0.0;
        for (double s : scores) total += s;
        return total / static_cast<double>(scores.size());
    }
    if (!groups || groups->size() != scores.size())
        throw std::invalid_argument("aggregate: macro mode requires a group label per score");
    std::map<std::string, std::pair<double, std::size_t>> by_group;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto& [total, count] = by_group[(*groups)[i]];
        total += scores[i];
        ++count;
    }
    double total = 0.0;
    for (auto& [g, tc] : by_group) total += tc.first / static_cast<double>(tc.second);
    return total / static_cast<double>(by_group.size());
}

}  // namespace taser
