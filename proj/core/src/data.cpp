#include "taser/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace taser {

using nlohmann::json;

const CorpusRecord& Corpus::by_id(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= passages.size())
        throw std::invalid_argument("corpus: unknown passage id " + std::to_string(id));
    return passages[static_cast<std::size_t>(id)];
}

std::string Corpus::full_text(int id) const {
    const CorpusRecord& r = by_id(id);
    if (r.title.empty()) return r.text;
    return r.title + " " + r.text;
}

namespace {

[[noreturn]] void line_error(const std::string& path, std::size_t line, const std::string& what) {
    throw std::runtime_error(path + ": line " + std::to_string(line) + ": " + what);
}

json parse_line(const std::string& path, std::size_t line_no, const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) line_error(path, line_no, "malformed JSON record");
    return j;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    Corpus corpus;
    std::set<int> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(path, line_no, line);
        if (!j.contains("id") || !j["id"].is_number_integer() || !j.contains("text") ||
            !j["text"].is_string())
            line_error(path, line_no, "corpus record needs integer 'id' and string 'text'");
        CorpusRecord rec;
        rec.id = j["id"].get<int>();
        rec.title = j.value("title", std::string());
        rec.text = j["text"].get<std::string>();
        if (rec.text.empty()) line_error(path, line_no, "passage text is empty");
        if (!ids.insert(rec.id).second)
            line_error(path, line_no, "duplicate passage id " + std::to_string(rec.id));
        corpus.passages.push_back(std::move(rec));
    }
    if (corpus.passages.empty()) throw std::runtime_error(path + ": empty corpus");
    std::sort(corpus.passages.begin(), corpus.passages.end(),
              [](const CorpusRecord& a, const CorpusRecord& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < corpus.passages.size(); ++i)
        if (corpus.passages[i].id != static_cast<int>(i))
            throw std::runtime_error(path + ": passage ids must be dense from 0, missing id " +
                                     std::to_string(i));
    return corpus;
}

Dataset load_dataset(const std::string& path, const Corpus* corpus) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    Dataset ds;
    std::set<int> ids;
    std::string line;
    std::size_t line_no = 0;
    auto check_ref = [&](int pid) {
        if (pid < 0 || (corpus && static_cast<std::size_t>(pid) >= corpus->size()))
            line_error(path, line_no, "passage reference " + std::to_string(pid) +
                                          " is outside the corpus");
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(path, line_no, line);
        if (!j.contains("id") || !j["id"].is_number_integer() || !j.contains("question") ||
            !j["question"].is_string())
            line_error(path, line_no, "dataset record needs integer 'id' and string 'question'");
        DatasetRecord rec;
        rec.id = j["id"].get<int>();
        rec.question = j["question"].get<std::string>();
        if (!j.contains("answers") || !j["answers"].is_array() || j["answers"].empty())
            line_error(path, line_no, "dataset record needs a nonempty 'answers' array");
        for (const auto& a : j["answers"]) rec.answers.push_back(a.get<std::string>());
        if (!j.contains("positive_passage_ids") || !j["positive_passage_ids"].is_array())
            line_error(path, line_no, "dataset record needs 'positive_passage_ids'");
        for (const auto& p : j["positive_passage_ids"]) {
            int pid = p.get<int>();
            check_ref(pid);
            rec.positive_ids.push_back(pid);
        }
        if (rec.positive_ids.empty())
            line_error(path, line_no, "record has no positive passages");
        if (j.contains("negative_passage_ids"))
            for (const auto& p : j["negative_passage_ids"]) {
                int pid = p.get<int>();
                check_ref(pid);
                rec.negative_ids.push_back(pid);
            }
        rec.group = j.value("group", std::string());
        if (!ids.insert(rec.id).second)
            line_error(path, line_no, "duplicate question id " + std::to_string(rec.id));
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const CorpusRecord& rec : corpus.passages) {
        json j{{"id", rec.id}, {"title", rec.title}, {"text", rec.text}};
        out << j.dump() << "\n";
    }
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (const DatasetRecord& rec : dataset.records) {
        json j{{"id", rec.id},
               {"question", rec.question},
               {"answers", rec.answers},
               {"positive_passage_ids", rec.positive_ids}};
        if (!rec.negative_ids.empty()) j["negative_passage_ids"] = rec.negative_ids;
        if (!rec.group.empty()) j["group"] = rec.group;
        out << j.dump() << "\n";
    }
}

// ---- vocabulary -----------------------------------------------------------------

namespace {

std::vector<std::string> whitespace_terms(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

Vocab Vocab::build(const Corpus& corpus) {
    std::set<std::string> unique;
    for (const CorpusRecord& rec : corpus.passages)
        for (std::string& t : whitespace_terms(rec.title + " " + rec.text))
            unique.insert(std::move(t));
    std::vector<std::string> terms{"[CLS]", "[SEP]", "[PAD]", "[UNK]"};
    terms.insert(terms.end(), unique.begin(), unique.end());
    return from_terms(std::move(terms));
}

Vocab Vocab::from_terms(std::vector<std::string> terms) {
    Vocab v;
    v.terms = std::move(terms);
    for (std::size_t i = 0; i < v.terms.size(); ++i)
        v.index.emplace(v.terms[i], static_cast<int>(i));
    return v;
}

int Vocab::id_of(std::string_view term) const {
    auto it = index.find(std::string(term));
    return it == index.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(std::string_view text, int max_len) const {
    std::vector<int> ids{kCls};
    for (const std::string& t : whitespace_terms(text)) {
        if (static_cast<int>(ids.size()) >= max_len - 1) break;
        ids.push_back(id_of(t));
    }
    ids.push_back(kSep);
    return ids;
}

// ---- synthetic task ----------------------------------------------------------------

namespace {

// Common words appear in every passage, so they match all passages equally
// under BM25 and carry no retrieval signal.
const char* kCommonWords[] = {"the", "of", "is", "about"};
constexpr int kNumCommon = 4;

std::string join(const std::vector<std::string>& tokens) {
    std::string text;
    for (const std::string& t : tokens) {
        if (!text.empty()) text += ' ';
        text += t;
    }
    return text;
}

}  // namespace

SynthTask make_synthetic_task(const SynthConfig& config) {
    if (config.num_passages < config.num_train + config.num_dev)
        throw std::invalid_argument(
            "make_synthetic_task: num_passages must be >= num_train + num_dev");
    if (config.num_train < 0 || config.num_dev < 0 || config.num_passages <= 0)
        throw std::invalid_argument("make_synthetic_task: counts must be nonnegative");
    if (config.overlap < 0.0 || config.overlap > 1.0)
        throw std::invalid_argument("make_synthetic_task: overlap must lie in [0, 1]");
    if (config.signature_len < 1 || config.distractor_vocab < 1)
        throw std::invalid_argument(
            "make_synthetic_task: signature_len and distractor_vocab must be >= 1");

    // Signatures are compositional: slot s of passage p holds the s-th
    // digit of p in a base just large enough that every passage gets a
    // distinct combination. Slot tokens are shared across many passages,
    // so questions about held-out passages still consist of trained
    // vocabulary; only the combination is new. Each passage additionally
    // carries one passage-unique answer token.
    int pool = 2;
    while (static_cast<std::int64_t>(std::pow(pool, config.signature_len)) <
           config.num_passages)
        ++pool;
    auto slot_token = [&](int slot, int value) {
        return std::string("key") + static_cast<char>('a' + slot % 26) + std::to_string(value);
    };
    auto slots_of = [&](int p) {
        std::vector<int> digits(static_cast<std::size_t>(config.signature_len));
        for (int s = config.signature_len - 1; s >= 0; --s) {
            digits[static_cast<std::size_t>(s)] = p % pool;
            p /= pool;
        }
        return digits;
    };
    // Terminated with a non-digit so no answer is a substring of another.
    auto answer_token = [](int p) { return "ans" + std::to_string(p) + "x"; };

    Rng rng(config.seed, 7001);
    std::vector<std::string> fillers;
    for (int i = 0; i < config.distractor_vocab; ++i)
        fillers.push_back("fill" + std::to_string(i));
    const char* question_words[] = {"what", "which", "where", "who"};

    SynthTask task;
    Rng text_rng = rng.substream(1);
    for (int p = 0; p < config.num_passages; ++p) {
        CorpusRecord rec;
        rec.id = p;
        rec.title = "doc " + std::to_string(p);
        std::vector<std::string> tokens;
        tokens.push_back(answer_token(p));
        std::vector<int> digits = slots_of(p);
        for (int s = 0; s < config.signature_len; ++s)
            tokens.push_back(slot_token(s, digits[static_cast<std::size_t>(s)]));
        for (int c = 0; c < kNumCommon; ++c) tokens.push_back(kCommonWords[c]);
        for (int f = 0; f < config.passage_fillers; ++f)
            tokens.push_back(fillers[text_rng.uniform_int(fillers.size())]);
        text_rng.shuffle(tokens);
        rec.text = join(tokens);
        task.corpus.passages.push_back(std::move(rec));
    }

    // Each question targets a distinct passage.
    std::vector<int> targets(static_cast<std::size_t>(config.num_passages));
    std::iota(targets.begin(), targets.end(), 0);
    Rng assign_rng = rng.substream(2);
    assign_rng.shuffle(targets);

    Rng q_rng = rng.substream(3);
    auto make_question = [&](int qid, int target) {
        DatasetRecord rec;
        rec.id = qid;
        std::vector<std::string> tokens;
        tokens.push_back(question_words[q_rng.uniform_int(4)]);
        std::vector<int> digits = slots_of(target);
        for (int s = 0; s < config.signature_len; ++s) {
            if (q_rng.uniform() < config.overlap)
                tokens.push_back(slot_token(s, digits[static_cast<std::size_t>(s)]));
            else
                tokens.push_back(fillers[q_rng.uniform_int(fillers.size())]);
        }
        // Question fillers come from the common pool: they match every
        // passage, keeping the gold passage the unique best lexical match
        // at full overlap.
        for (int f = 0; f < config.question_fillers; ++f)
            tokens.push_back(kCommonWords[q_rng.uniform_int(kNumCommon)]);
        rec.question = join(tokens);
        rec.answers.push_back(answer_token(target));
        rec.positive_ids.push_back(target);
        return rec;
    };
    for (int i = 0; i < config.num_train; ++i)
        task.train.records.push_back(make_question(i, targets[static_cast<std::size_t>(i)]));
    for (int i = 0; i < config.num_dev; ++i)
        task.dev.records.push_back(
            make_question(i, targets[static_cast<std::size_t>(config.num_train + i)]));
    return task;
}

}  // namespace taser
