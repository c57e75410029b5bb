#include "taser/ranking.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace taser {

void canonical_sort(std::vector<ScoredDoc>& items) {
    std::sort(items.begin(), items.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
}

void write_trec_run(const std::string& path, std::span<const RankedList> lists,
                    const std::string& tag) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write run file: " + path);
    char score_buf[64];
    for (const RankedList& list : lists) {
        int rank = 1;
        for (const ScoredDoc& item : list.items) {
            std::snprintf(score_buf, sizeof score_buf, "%.9g", item.score);
            out << list.query_id << " Q0 " << item.doc_id << " " << rank << " " << score_buf
                << " " << tag << "\n";
            ++rank;
        }
    }
}

std::vector<RankedList> read_trec_run(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run file: " + path);
    std::map<int, RankedList> by_query;
    std::vector<int> order;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        int qid, docid, rank;
        std::string q0, tag;
        double score;
        if (!(is >> qid >> q0 >> docid >> rank >> score >> tag))
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": malformed run record");
        auto [it, inserted] = by_query.try_emplace(qid);
        if (inserted) {
            it->second.query_id = qid;
            order.push_back(qid);
        }
        it->second.items.push_back({docid, score});
    }
    std::vector<RankedList> out;
    out.reserve(order.size());
    for (int qid : order) out.push_back(std::move(by_query[qid]));
    return out;
}

}  // namespace taser
