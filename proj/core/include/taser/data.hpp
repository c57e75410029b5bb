#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "taser/rng.hpp"

namespace taser {

struct CorpusRecord {
    int id = 0;
    std::string title;
    std::string text;
};

/// Retrieval collection. Passage ids are dense 0..N-1 and double as row
/// indices everywhere downstream.
struct Corpus {
    std::vector<CorpusRecord> passages;

    std::size_t size() const { return passages.size(); }
    const CorpusRecord& by_id(int id) const;
    /// title + " " + text, the string fed to both retrievers.
    std::string full_text(int id) const;
};

struct DatasetRecord {
    int id = 0;
    std::string question;
    std::vector<std::string> answers;
    std::vector<int> positive_ids;
    std::vector<int> negative_ids;
    std::string group;  // optional label for macro aggregation
};

struct Dataset {
    std::vector<DatasetRecord> records;
    std::size_t size() const { return records.size(); }
};

/// Line-delimited JSON loaders; malformed lines are reported with their
/// line number, dangling passage references with the offending id.
Corpus load_corpus(const std::string& path);
Dataset load_dataset(const std::string& path, const Corpus* corpus = nullptr);
void save_corpus(const std::string& path, const Corpus& corpus);
void save_dataset(const std::string& path, const Dataset& dataset);

/// Whitespace-split lowercase vocabulary with reserved CLS/SEP/PAD/UNK ids.
struct Vocab {
    static constexpr int kCls = 0;
    static constexpr int kSep = 1;
    static constexpr int kPad = 2;
    static constexpr int kUnk = 3;

    std::vector<std::string> terms;  // id -> term, specials included
    std::unordered_map<std::string, int> index;

    static Vocab build(const Corpus& corpus);
    static Vocab from_terms(std::vector<std::string> terms);

    int size() const { return static_cast<int>(terms.size()); }
    int id_of(std::string_view term) const;
    /// [CLS] tokens... [SEP], truncated to max_len ids.
    std::vector<int> encode(std::string_view text, int max_len) const;
};

struct SynthConfig {
    int num_passages = 256;
    int num_train = 128;
    int num_dev = 32;
    std::uint64_t seed = 0;
    /// Probability that a signature token appears verbatim in the question;
    /// 1.0 maximizes lexical overlap and hands BM25 a perfect signal.
    double overlap = 1.0;
    int signature_len = 3;
    int passage_fillers = 6;
    int question_fillers = 2;
    int distractor_vocab = 64;
};

struct SynthTask {
    Corpus corpus;
    Dataset train;
    Dataset dev;
};

/// Deterministic desk-scale retrieval task: each passage carries a unique
/// keyword signature over a shared distractor vocabulary, each question
/// paraphrases one distinct passage's signature, and the answer is a
/// signature token.
SynthTask make_synthetic_task(const SynthConfig& config);

}  // namespace taser
