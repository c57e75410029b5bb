#include "taser/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace taser {

std::vector<std::string> analyze(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

InvertedIndex InvertedIndex::build(const Corpus& corpus) {
    if (corpus.size() == 0) throw std::invalid_argument("bm25: cannot index an empty corpus");
    InvertedIndex index;
    index.doc_len_.resize(corpus.size(), 0);
    std::int64_t total_len = 0;
    for (const CorpusRecord& rec : corpus.passages) {
        std::vector<std::string> terms = analyze(corpus.full_text(rec.id));
        index.doc_len_[static_cast<std::size_t>(rec.id)] = static_cast<int>(terms.size());
        total_len += static_cast<std::int64_t>(terms.size());
        std::unordered_map<std::string, int> tf;
        for (std::string& t : terms) ++tf[std::move(t)];
        for (auto& [term, freq] : tf) index.postings_[term].push_back({rec.id, freq});
    }
    for (auto& [term, list] : index.postings_)
        std::sort(list.begin(), list.end(),
                  [](const Posting& a, const Posting& b) { return a.doc_id < b.doc_id; });
    index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(corpus.size());
    return index;
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? nullptr : &it->second;
}

int InvertedIndex::doc_len(int doc_id) const {
    if (doc_id < 0 || static_cast<std::size_t>(doc_id) >= doc_len_.size())
        throw std::invalid_argument("bm25: unknown passage id " + std::to_string(doc_id));
    return doc_len_[static_cast<std::size_t>(doc_id)];
}

double InvertedIndex::idf(std::string_view term) const {
    const std::vector<Posting>* list = postings(term);
    if (!list) return 0.0;
    double n_t = static_cast<double>(list->size());
    double n = static_cast<double>(doc_len_.size());
    return std::log(1.0 + (n - n_t + 0.5) / (n_t + 0.5));
}

double InvertedIndex::score(std::span<const std::string> query_terms, int doc_id,
                            const Bm25Params& params) const {
    int len = doc_len(doc_id);
    std::set<std::string> unique(query_terms.begin(), query_terms.end());
    double norm = params.k1 * (1.0 - params.b + params.b * static_cast<double>(len) / avgdl_);
    double total = 0.0;
    for (const std::string& term : unique) {
        const std::vector<Posting>* list = postings(term);
        if (!list) continue;
        auto it = std::lower_bound(list->begin(), list->end(), doc_id,
                                   [](const Posting& p, int id) { return p.doc_id < id; });
        if (it == list->end() || it->doc_id != doc_id) continue;
        double tf = static_cast<double>(it->tf);
        total += idf(term) * tf / (tf + norm);
    }
    return total;
}

RankedList InvertedIndex::topk(std::string_view query, int k, const Bm25Params& params,
                               int query_id) const {
    if (k < 1) throw std::invalid_argument("bm25: k must be >= 1");
    std::vector<std::string> terms = analyze(query);
    std::set<std::string> unique(terms.begin(), terms.end());
    std::unordered_map<int, double> acc;
    for (const std::string& term : unique) {
        const std::vector<Posting>* list = postings(term);
        if (!list) continue;
        double w = idf(term);
        for (const Posting& p : *list) {
            double len = static_cast<double>(doc_len_[static_cast<std::size_t>(p.doc_id)]);
            double norm = params.k1 * (1.0 - params.b + params.b * len / avgdl_);
            double tf = static_cast<double>(p.tf);
            acc[p.doc_id] += w * tf / (tf + norm);
        }
    }
    RankedList out;
    out.query_id = query_id;
    out.items.reserve(acc.size());
    for (auto& [doc, s] : acc) out.items.push_back({doc, s});
    canonical_sort(out.items);
    if (out.items.size() > static_cast<std::size_t>(k)) out.items.resize(static_cast<std::size_t>(k));
    return out;
}

// ---- persistence ----------------------------------------------------------------
//
// Single-file layout, little-endian:
//   magic "TASRBM1\0" | u64 N | f64 avgdl | i32 doc_len[N]
//   u64 num_terms | per term: u32 len, bytes, u64 postings, (i32 doc, i32 tf)*

namespace {

constexpr char kMagic[8] = {'T', 'A', 'S', 'R', 'B', 'M', '1', '\0'};

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

void InvertedIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write index file: " + path);
    out.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(out, doc_len_.size());
    put<double>(out, avgdl_);
    for (int len : doc_len_) put<std::int32_t>(out, len);
    put<std::uint64_t>(out, postings_.size());
    for (const auto& [term, list] : postings_) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(term.size()));
        out.write(term.data(), static_cast<std::streamsize>(term.size()));
        put<std::uint64_t>(out, list.size());
        for (const Posting& p : list) {
            put<std::int32_t>(out, p.doc_id);
            put<std::int32_t>(out, p.tf);
        }
    }
    if (!out) throw std::runtime_error("failed writing index file: " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open index file: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kMagic))
        throw std::runtime_error(path + ": not a bm25 index file");
    InvertedIndex index;
    std::uint64_t n = get<std::uint64_t>(in);
    index.avgdl_ = get<double>(in);
    index.doc_len_.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) index.doc_len_[i] = get<std::int32_t>(in);
    std::uint64_t terms = get<std::uint64_t>(in);
    for (std::uint64_t t = 0; t < terms; ++t) {
        std::uint32_t len = get<std::uint32_t>(in);
        std::string term(len, '\0');
        in.read(term.data(), len);
        std::uint64_t count = get<std::uint64_t>(in);
        std::vector<Posting> list(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            list[i].doc_id = get<std::int32_t>(in);
            list[i].tf = get<std::int32_t>(in);
        }
        index.postings_.emplace(std::move(term), std::move(list));
    }
    if (!in) throw std::runtime_error(path + ": truncated bm25 index file");
    return index;
}

bool InvertedIndex::operator==(const InvertedIndex& other) const {
    if (doc_len_ != other.doc_len_ || avgdl_ != other.avgdl_) return false;
    if (postings_.size() != other.postings_.size()) return false;
    for (const auto& [term, list] : postings_) {
        auto it = other.postings_.find(term);
        if (it == other.postings_.end() || it->second.size() != list.size()) return false;
        for (std::size_t i = 0; i < list.size(); ++i)
            if (list[i].doc_id != it->second[i].doc_id || list[i].tf != it->second[i].tf)
                return false;
    }
    return true;
}

}  // namespace taser
