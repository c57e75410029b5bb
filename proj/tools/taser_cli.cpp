// Command-line front end for the taser retrieval laboratory:
//   make-task | params | train | mine | embed | search | eval | tune-alpha
// Every command reads explicit flags (no environment variables), writes its
// artifacts to the given paths, and reports failures as a single JSON object
// on stderr with a nonzero exit code.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "taser/bm25.hpp"
#include "taser/checkpoint.hpp"
#include "taser/data.hpp"
#include "taser/dense.hpp"
#include "taser/encoder.hpp"
#include "taser/metrics.hpp"
#include "taser/ranking.hpp"
#include "taser/train.hpp"

using json = nlohmann::json;
using namespace taser;

namespace {

void require_file(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error(what + " not found: " + path);
}

struct DimFlags {
    int vocab_size = 30522;
    int max_positions = 512;
    int type_vocab_size = 2;
    int d_model = 768;
    int ffn_inner = 3072;
    int num_heads = 12;
    int num_blocks = 12;
    int period = 2;

    void attach(CLI::App* cmd) {
        cmd->add_option("--vocab-size", vocab_size, "Token vocabulary size");
        cmd->add_option("--max-positions", max_positions, "Maximum sequence length");
        cmd->add_option("--type-vocab-size", type_vocab_size, "Segment type vocabulary");
        cmd->add_option("--d-model", d_model, "Hidden size d");
        cmd->add_option("--ffn-inner", ffn_inner, "FFN inner size m");
        cmd->add_option("--heads", num_heads, "Attention heads");
        cmd->add_option("--blocks", num_blocks, "Transformer blocks L");
        cmd->add_option("--period", period, "Shared blocks between specialized ones (T)");
    }
    EncoderConfig to_config(RoutingKind routing, int experts, bool pooler) const {
        EncoderConfig cfg;
        cfg.vocab_size = vocab_size;
        cfg.max_positions = max_positions;
        cfg.type_vocab_size = type_vocab_size;
        cfg.d_model = d_model;
        cfg.ffn_inner = ffn_inner;
        cfg.num_heads = num_heads;
        cfg.num_blocks = num_blocks;
        cfg.interleave_period = period;
        cfg.num_experts = experts;
        cfg.routing = routing;
        cfg.include_pooler = pooler;
        return cfg;
    }
};

// ---- params ---------------------------------------------------------------------

int cmd_params(const DimFlags& dims, bool as_json) {
    struct Row {
        std::string name;
        int experts;
        std::int64_t params;
    };
    std::vector<Row> rows;
    auto count = [&](RoutingKind kind, int experts) {
        return count_params(dims.to_config(kind, experts, true));
    };
    rows.push_back({"shared", 1, count(RoutingKind::Shared, 1)});
    rows.push_back({"det", 2, count(RoutingKind::Det, 2)});
    rows.push_back({"seq", 2, count(RoutingKind::Seq, 2)});
    rows.push_back({"seq", 4, count(RoutingKind::Seq, 4)});
    rows.push_back({"tok", 2, count(RoutingKind::Tok, 2)});
    rows.push_back({"tok", 4, count(RoutingKind::Tok, 4)});
    std::int64_t bi = count_params_bi_encoder(dims.to_config(RoutingKind::Shared, 1, true));
    rows.push_back({"bi-encoder", 0, bi});

    if (as_json) {
        json out = json::array();
        for (const Row& row : rows)
            out.push_back({{"model", row.name},
                           {"experts", row.experts},
                           {"params", row.params},
                           {"millions", row.params / 1000000}});
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    std::printf("%-12s %8s %16s %6s\n", "model", "experts", "params", "label");
    for (const Row& row : rows) {
        if (row.experts > 0)
            std::printf("%-12s %8d %16lld %4lldM\n", row.name.c_str(), row.experts,
                        static_cast<long long>(row.params),
                        static_cast<long long>(row.params / 1000000));
        else
            std::printf("%-12s %8s %16lld %4lldM\n", row.name.c_str(), "-",
                        static_cast<long long>(row.params),
                        static_cast<long long>(row.params / 1000000));
    }
    return 0;
}

// ---- make-task ------------------------------------------------------------------

int cmd_make_task(const SynthConfig& cfg, const std::string& out_dir) {
    SynthTask task = make_synthetic_task(cfg);
    std::filesystem::create_directories(out_dir);
    save_corpus(out_dir + "/corpus.jsonl", task.corpus);
    save_dataset(out_dir + "/train.jsonl", task.train);
    save_dataset(out_dir + "/dev.jsonl", task.dev);
    std::cout << "wrote " << task.corpus.size() << " passages, " << task.train.size()
              << " train / " << task.dev.size() << " dev questions to " << out_dir << "\n";
    return 0;
}

// ---- train ----------------------------------------------------------------------

struct TrainFlags {
    std::string corpus_path, train_path, dev_path, out_path, log_path, init_checkpoint;
    std::string routing = "det";
    std::string negatives = "auto";  // auto: bm25 when the dataset has none
    int experts = 2;
    TrainConfig tc;
    DimFlags dims;
};

int cmd_train(TrainFlags& flags) {
    require_file(flags.corpus_path, "corpus");
    require_file(flags.train_path, "train dataset");
    require_file(flags.dev_path, "dev dataset");
    Corpus corpus = load_corpus(flags.corpus_path);
    Dataset train_set = load_dataset(flags.train_path, &corpus);
    Dataset dev_set = load_dataset(flags.dev_path, &corpus);

    Vocab vocab;
    TaserEncoder enc;
    if (!flags.init_checkpoint.empty()) {
        require_file(flags.init_checkpoint, "init checkpoint");
        Checkpoint ckpt = load_checkpoint(flags.init_checkpoint);
        enc = std::move(ckpt.encoder);
        vocab = std::move(ckpt.vocab);
    } else {
        vocab = Vocab::build(corpus);
        RoutingKind kind = routing_kind_from_string(flags.routing);
        int experts = kind == RoutingKind::Shared ? 1 : flags.experts;
        flags.dims.vocab_size = vocab.size();
        EncoderConfig cfg = flags.dims.to_config(kind, experts, false);
        Rng init_rng(flags.tc.seed, 0);
        enc = init_encoder(cfg, init_rng);
    }

    bool has_explicit = false;
    for (const DatasetRecord& rec : train_set.records)
        has_explicit = has_explicit || !rec.negative_ids.empty();
    if (flags.negatives == "bm25" || (flags.negatives == "auto" && !has_explicit)) {
        InvertedIndex index = InvertedIndex::build(corpus);
        auto p1 = bm25_hard_negatives(index, corpus, train_set);
        std::map<int, std::vector<int>> p1v;
        for (auto& [qid, pid] : p1) p1v[qid] = {pid};
        train_set = attach_negatives(train_set, p1v, false);
    } else if (flags.negatives == "none") {
        for (DatasetRecord& rec : train_set.records) rec.negative_ids.clear();
    } else if (flags.negatives != "given" && flags.negatives != "auto" &&
               flags.negatives != "bm25") {
        throw std::runtime_error("train: unknown --negatives '" + flags.negatives +
                                 "' (expected auto | bm25 | given | none)");
    }

    TrainResult result = train(enc, train_set, dev_set, corpus, vocab, flags.tc);
    save_checkpoint(flags.out_path, enc, vocab);

    if (!flags.log_path.empty()) {
        std::ofstream log(flags.log_path);
        if (!log) throw std::runtime_error("cannot write training log: " + flags.log_path);
        for (const EpochLog& entry : result.log) {
            json j{{"epoch", entry.epoch},
                   {"mean_l_sim", entry.mean_l_sim},
                   {"mean_l_ent", entry.mean_l_ent}};
            j["dev_recall"] = entry.dev_recall ? json(*entry.dev_recall) : json(nullptr);
            log << j.dump() << "\n";
        }
    }
    std::cout << "best dev R@" << flags.tc.eval_k << " = " << result.best_dev_recall
              << " at epoch " << result.best_epoch << "; checkpoint written to "
              << flags.out_path << "\n";
    return 0;
}

// ---- mine -----------------------------------------------------------------------

int cmd_mine(const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& dataset_path, const std::string& out_path, int top_n,
             bool combine, int threads) {
    require_file(ckpt_path, "checkpoint");
    require_file(corpus_path, "corpus");
    require_file(dataset_path, "dataset");
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Corpus corpus = load_corpus(corpus_path);
    Dataset dataset = load_dataset(dataset_path, &corpus);
    auto mined = mine_hard_negatives(ckpt.encoder, ckpt.vocab, corpus, dataset, top_n, threads);
    Dataset out = attach_negatives(dataset, mined, combine);
    save_dataset(out_path, out);
    std::cout << "mined negatives for " << mined.size() << " questions into " << out_path
              << (combine ? " (combined with existing)" : " (replacing existing)") << "\n";
    return 0;
}

// ---- embed ----------------------------------------------------------------------

int cmd_embed(const std::string& ckpt_path, const std::string& corpus_path,
              const std::string& out_path, int threads) {
    require_file(ckpt_path, "checkpoint");
    require_file(corpus_path, "corpus");
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Corpus corpus = load_corpus(corpus_path);
    DenseIndex index = embed_corpus(ckpt.encoder, ckpt.vocab, corpus, threads);
    save_dense_index(out_path, index);
    std::cout << "embedded " << index.num_rows() << " passages (d=" << index.dim
              << ", fingerprint " << index.fingerprint << ") to " << out_path << "\n";
    return 0;
}

// ---- search ---------------------------------------------------------------------

struct SearchFlags {
    std::string corpus_path, queries_path, out_path;
    std::string mode = "dense";  // dense | bm25 | hybrid
    std::string ckpt_path, dense_index_path, bm25_index_path, save_bm25_index;
    std::string tag = "taser";
    double alpha = 1.0;
    int k = 5;
    int kprime = 100;
    double bm25_k1 = 0.9;
    double bm25_b = 0.4;
    int threads = 1;
};

int cmd_search(const SearchFlags& flags) {
    require_file(flags.corpus_path, "corpus");
    require_file(flags.queries_path, "queries dataset");
    Corpus corpus = load_corpus(flags.corpus_path);
    Dataset queries = load_dataset(flags.queries_path, &corpus);
    bool want_dense = flags.mode == "dense" || flags.mode == "hybrid";
    bool want_sparse = flags.mode == "bm25" || flags.mode == "hybrid";
    if (!want_dense && !want_sparse)
        throw std::runtime_error("search: unknown mode '" + flags.mode +
                                 "' (expected dense | bm25 | hybrid)");

    std::optional<Checkpoint> ckpt;
    std::optional<DenseIndex> dense;
    if (want_dense) {
        require_file(flags.ckpt_path, "checkpoint");
        ckpt = load_checkpoint(flags.ckpt_path);
        if (!flags.dense_index_path.empty()) {
            require_file(flags.dense_index_path, "dense index");
            dense = load_dense_index(flags.dense_index_path);
            std::uint64_t expected = encoder_fingerprint(ckpt->encoder, ckpt->vocab);
            if (dense->fingerprint != expected)
                throw std::runtime_error(
                    "dense index fingerprint " + std::to_string(dense->fingerprint) +
                    " does not match checkpoint fingerprint " + std::to_string(expected) +
                    "; refusing to search a stale index");
        } else {
            dense = embed_corpus(ckpt->encoder, ckpt->vocab, corpus, flags.threads);
        }
    }
    std::optional<InvertedIndex> sparse;
    if (want_sparse) {
        if (!flags.bm25_index_path.empty()) {
            require_file(flags.bm25_index_path, "bm25 index");
            sparse = InvertedIndex::load(flags.bm25_index_path);
        } else {
            sparse = InvertedIndex::build(corpus);
        }
        if (!flags.save_bm25_index.empty()) sparse->save(flags.save_bm25_index);
    }

    Bm25Params bm25_params{flags.bm25_k1, flags.bm25_b};
    std::vector<RankedList> results;
    for (const DatasetRecord& rec : queries.records) {
        if (flags.mode == "dense") {
            std::vector<double> q = encode_query(ckpt->encoder, ckpt->vocab, rec.question);
            results.push_back(dense_topk(*dense, q, flags.k, rec.id));
        } else if (flags.mode == "bm25") {
            results.push_back(sparse->topk(rec.question, flags.k, bm25_params, rec.id));
        } else {
            std::vector<double> q = encode_query(ckpt->encoder, ckpt->vocab, rec.question);
            RankedList d = dense_topk(*dense, q, flags.kprime, rec.id);
            RankedList s = sparse->topk(rec.question, flags.kprime, bm25_params, rec.id);
            results.push_back(hybrid_rank(d, s, flags.alpha, flags.k));
        }
    }
    write_trec_run(flags.out_path, results, flags.tag);
    std::cout << "wrote " << results.size() << " ranked lists to " << flags.out_path << "\n";
    return 0;
}

// ---- eval -----------------------------------------------------------------------

struct EvalFlags {
    std::string run_path, qrels_path, corpus_path, dataset_path, out_path;
    std::string metric = "recall";
    int k = 5;
    bool macro = false;
};

int cmd_eval(const EvalFlags& flags) {
    require_file(flags.run_path, "run file");
    std::vector<RankedList> lists = read_trec_run(flags.run_path);

    EvalSummary summary;
    std::optional<Dataset> dataset;
    if (flags.metric == "recall") {
        require_file(flags.corpus_path, "corpus");
        require_file(flags.dataset_path, "dataset");
        Corpus corpus = load_corpus(flags.corpus_path);
        dataset = load_dataset(flags.dataset_path, &corpus);
        summary = recall_at_k(lists, answers_from_dataset(*dataset), corpus, flags.k);
    } else if (flags.metric == "ndcg") {
        require_file(flags.qrels_path, "qrels file");
        QrelSet qrels = read_qrels(flags.qrels_path);
        summary = ndcg_at_k(lists, qrels, flags.k);
    } else {
        throw std::runtime_error("eval: unknown metric '" + flags.metric +
                                 "' (expected recall | ndcg)");
    }

    json out{{"metric", flags.metric},
             {"k", flags.k},
             {"num_queries", summary.num_queries},
             {"score", summary.score},
             {"aggregation", "micro"}};
    if (flags.macro) {
        if (!dataset)
            throw std::runtime_error("eval: --macro needs --dataset group labels");
        std::map<int, std::string> group_of;
        for (const DatasetRecord& rec : dataset->records) {
            if (rec.group.empty())
                throw std::runtime_error("eval: --macro requires a group label per query; "
                                         "question " + std::to_string(rec.id) + " has none");
            group_of[rec.id] = rec.group;
        }
        std::vector<double> scores;
        std::vector<std::string> groups;
        for (auto& [qid, score] : summary.per_query) {
            auto it = group_of.find(qid);
            if (it == group_of.end())
                throw std::runtime_error("eval: query " + std::to_string(qid) +
                                         " missing from the dataset's group labels");
            scores.push_back(score);
            groups.push_back(it->second);
        }
        out["aggregation"] = "macro";
        out["score"] = aggregate(scores, &groups, AggregateMode::Macro);
        out["micro_score"] = summary.score;
    }
    json per_query = json::object();
    for (auto& [qid, score] : summary.per_query) per_query[std::to_string(qid)] = score;
    out["per_query"] = std::move(per_query);

    std::string text = out.dump(2);
    if (!flags.out_path.empty()) {
        std::ofstream f(flags.out_path);
        if (!f) throw std::runtime_error("cannot write metrics file: " + flags.out_path);
        f << text << "\n";
    }
    std::cout << text << "\n";
    return 0;
}

// ---- tune-alpha -----------------------------------------------------------------

struct TuneFlags {
    std::string corpus_path, dataset_path, ckpt_path, dense_index_path, out_path;
    int k = 5;
    int kprime = 100;
    double bm25_k1 = 0.9;
    double bm25_b = 0.4;
    int threads = 1;
};

int cmd_tune_alpha(const TuneFlags& flags) {
    require_file(flags.corpus_path, "corpus");
    require_file(flags.dataset_path, "dev dataset");
    require_file(flags.ckpt_path, "checkpoint");
    Corpus corpus = load_corpus(flags.corpus_path);
    Dataset dev = load_dataset(flags.dataset_path, &corpus);
    Checkpoint ckpt = load_checkpoint(flags.ckpt_path);

    DenseIndex dense;
    if (!flags.dense_index_path.empty()) {
        require_file(flags.dense_index_path, "dense index");
        dense = load_dense_index(flags.dense_index_path);
        std::uint64_t expected = encoder_fingerprint(ckpt.encoder, ckpt.vocab);
        if (dense.fingerprint != expected)
            throw std::runtime_error("dense index fingerprint mismatch; re-run embed");
    } else {
        dense = embed_corpus(ckpt.encoder, ckpt.vocab, corpus, flags.threads);
    }
    InvertedIndex sparse = InvertedIndex::build(corpus);
    Bm25Params bm25_params{flags.bm25_k1, flags.bm25_b};

    std::vector<RankedList> dense_lists, sparse_lists;
    for (const DatasetRecord& rec : dev.records) {
        std::vector<double> q = encode_query(ckpt.encoder, ckpt.vocab, rec.question);
        dense_lists.push_back(dense_topk(dense, q, flags.kprime, rec.id));
        sparse_lists.push_back(sparse.topk(rec.question, flags.kprime, bm25_params, rec.id));
    }
    AlphaResult result =
        tune_alpha(dense_lists, sparse_lists, answers_from_dataset(dev), corpus, flags.k);

    json grid = json::array();
    for (const AlphaPoint& p : result.grid)
        grid.push_back({{"alpha", p.alpha}, {"score", p.score}});
    json out{{"best_alpha", result.best_alpha},
             {"best_score", result.best_score},
             {"metric", "recall"},
             {"k", flags.k},
             {"kprime", flags.kprime},
             {"grid", std::move(grid)}};
    std::string text = out.dump(2);
    if (!flags.out_path.empty()) {
        std::ofstream f(flags.out_path);
        if (!f) throw std::runtime_error("cannot write alpha file: " + flags.out_path);
        f << text << "\n";
    }
    std::cout << text << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"taser: a desk-scale dense-retrieval laboratory"};
    app.require_subcommand(1);

    // params
    auto* params = app.add_subcommand("params", "Print parameter counts for every variant");
    DimFlags params_dims;
    params_dims.attach(params);
    bool params_json = false;
    params->add_flag("--json", params_json, "Emit JSON instead of a table");

    // make-task
    auto* make_task = app.add_subcommand("make-task", "Generate a synthetic retrieval task");
    SynthConfig synth;
    std::string task_dir = "task";
    make_task->add_option("--out-dir", task_dir, "Output directory")->required();
    make_task->add_option("--passages", synth.num_passages, "Corpus size");
    make_task->add_option("--train-questions", synth.num_train, "Training questions");
    make_task->add_option("--dev-questions", synth.num_dev, "Dev questions");
    make_task->add_option("--seed", synth.seed, "Generator seed")->required();
    make_task->add_option("--overlap", synth.overlap,
                          "Probability a signature token appears verbatim in the question");
    make_task->add_option("--signature-len", synth.signature_len, "Signature slots per passage");
    make_task->add_option("--passage-fillers", synth.passage_fillers, "Filler tokens per passage");
    make_task->add_option("--question-fillers", synth.question_fillers,
                          "Common filler tokens per question");
    make_task->add_option("--distractor-vocab", synth.distractor_vocab,
                          "Shared distractor vocabulary size");

    // train
    auto* train_cmd = app.add_subcommand("train", "Contrastive training with in-batch negatives");
    TrainFlags tf;
    tf.dims.d_model = 32;
    tf.dims.ffn_inner = 128;
    tf.dims.num_heads = 4;
    tf.dims.num_blocks = 6;
    tf.dims.max_positions = 64;
    train_cmd->add_option("--corpus", tf.corpus_path, "Corpus jsonl")->required();
    train_cmd->add_option("--train", tf.train_path, "Training dataset jsonl")->required();
    train_cmd->add_option("--dev", tf.dev_path, "Dev dataset jsonl")->required();
    train_cmd->add_option("--out", tf.out_path, "Output checkpoint path")->required();
    train_cmd->add_option("--log", tf.log_path, "Per-epoch JSONL training log");
    train_cmd->add_option("--init-checkpoint", tf.init_checkpoint,
                          "Warm-start from an existing checkpoint (round-2 training)");
    train_cmd->add_option("--routing", tf.routing, "shared | det | seq | tok");
    train_cmd->add_option("--experts", tf.experts, "Expert FFNs per specialized block");
    train_cmd->add_option("--seed", tf.tc.seed, "Training seed")->required();
    train_cmd->add_option("--epochs", tf.tc.epochs, "Training epochs");
    train_cmd->add_option("--lr", tf.tc.lr, "Adam learning rate");
    train_cmd->add_option("--batch-size", tf.tc.batch_size, "Mini-batch size");
    train_cmd->add_option("--beta", tf.tc.beta_entropy,
                          "Entropy regularizer weight (learned routing)");
    train_cmd->add_option("--tau", tf.tc.gumbel_tau, "Gumbel-Softmax temperature");
    train_cmd->add_option("--eval-every", tf.tc.eval_every, "Dev evaluation cadence (epochs)");
    train_cmd->add_option("--eval-k", tf.tc.eval_k, "Dev recall cutoff");
    train_cmd->add_option("--max-negatives", tf.tc.max_negatives_per_question,
                          "Explicit negatives per question per batch");
    train_cmd->add_option("--negatives", tf.negatives,
                          "auto | bm25 | given | none (first-round negative source)");
    train_cmd->add_option("--threads", tf.tc.embed_threads, "Dev-eval embedding workers");
    bool no_early_stop = false;
    train_cmd->add_flag("--no-early-stop", no_early_stop, "Run every epoch even at dev 1.0");
    tf.dims.attach(train_cmd);

    // mine
    auto* mine = app.add_subcommand("mine", "Mine dense hard negatives with a trained model");
    std::string mine_ckpt, mine_corpus, mine_dataset, mine_out;
    int mine_top_n = 10, mine_threads = 1;
    bool mine_combine = false;
    std::uint64_t mine_seed = 0;
    mine->add_option("--checkpoint", mine_ckpt, "Round-1 checkpoint")->required();
    mine->add_option("--corpus", mine_corpus, "Corpus jsonl")->required();
    mine->add_option("--dataset", mine_dataset, "Dataset jsonl to attach negatives to")
        ->required();
    mine->add_option("--out", mine_out, "Output dataset jsonl")->required();
    mine->add_option("--top-n", mine_top_n, "Mined negatives per question");
    mine->add_flag("--combine", mine_combine,
                   "Union mined negatives with existing ones (single-set rule)");
    mine->add_option("--seed", mine_seed, "Seed (mining itself is deterministic)")->required();
    mine->add_option("--threads", mine_threads, "Embedding workers");

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "Embed the corpus into a dense index");
    std::string embed_ckpt, embed_corpus_path, embed_out;
    int embed_threads = 1;
    embed_cmd->add_option("--checkpoint", embed_ckpt, "Checkpoint")->required();
    embed_cmd->add_option("--corpus", embed_corpus_path, "Corpus jsonl")->required();
    embed_cmd->add_option("--out", embed_out, "Output dense index")->required();
    embed_cmd->add_option("--threads", embed_threads, "Embedding workers");

    // search
    auto* search = app.add_subcommand("search", "Rank passages for a query set");
    SearchFlags sf;
    search->add_option("--corpus", sf.corpus_path, "Corpus jsonl")->required();
    search->add_option("--queries", sf.queries_path, "Query dataset jsonl")->required();
    search->add_option("--out", sf.out_path, "Output TREC run file")->required();
    search->add_option("--mode", sf.mode, "dense | bm25 | hybrid");
    search->add_option("--checkpoint", sf.ckpt_path, "Checkpoint (dense/hybrid)");
    search->add_option("--dense-index", sf.dense_index_path, "Prebuilt dense index");
    search->add_option("--bm25-index", sf.bm25_index_path, "Prebuilt bm25 index");
    search->add_option("--save-bm25-index", sf.save_bm25_index, "Persist the built bm25 index");
    search->add_option("--alpha", sf.alpha, "Hybrid weight on the sparse arm");
    search->add_option("--k", sf.k, "Results per query");
    search->add_option("--kprime", sf.kprime, "Candidates fetched per arm before fusion");
    search->add_option("--bm25-k1", sf.bm25_k1, "BM25 k1");
    search->add_option("--bm25-b", sf.bm25_b, "BM25 b");
    search->add_option("--tag", sf.tag, "Run tag column");
    search->add_option("--threads", sf.threads, "Embedding workers");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score a run file");
    EvalFlags ef;
    eval_cmd->add_option("--run", ef.run_path, "TREC run file")->required();
    eval_cmd->add_option("--metric", ef.metric, "recall | ndcg");
    eval_cmd->add_option("--k", ef.k, "Cutoff");
    eval_cmd->add_option("--qrels", ef.qrels_path, "Qrels file (ndcg)");
    eval_cmd->add_option("--corpus", ef.corpus_path, "Corpus jsonl (recall)");
    eval_cmd->add_option("--dataset", ef.dataset_path, "Dataset jsonl with answers (recall)");
    eval_cmd->add_option("--out", ef.out_path, "Metrics JSON output path");
    eval_cmd->add_flag("--macro", ef.macro, "Macro-average over the dataset's group labels");

    // tune-alpha
    auto* tune = app.add_subcommand("tune-alpha", "Grid-search the hybrid weight on a dev set");
    TuneFlags uf;
    tune->add_option("--corpus", uf.corpus_path, "Corpus jsonl")->required();
    tune->add_option("--dataset", uf.dataset_path, "Dev dataset jsonl")->required();
    tune->add_option("--checkpoint", uf.ckpt_path, "Checkpoint")->required();
    tune->add_option("--dense-index", uf.dense_index_path, "Prebuilt dense index");
    tune->add_option("--k", uf.k, "Metric cutoff");
    tune->add_option("--kprime", uf.kprime, "Candidates per arm");
    tune->add_option("--bm25-k1", uf.bm25_k1, "BM25 k1");
    tune->add_option("--bm25-b", uf.bm25_b, "BM25 b");
    tune->add_option("--out", uf.out_path, "Alpha JSON output path");
    tune->add_option("--threads", uf.threads, "Embedding workers");

    try {
        app.parse(argc, argv);
        if (params->parsed()) return cmd_params(params_dims, params_json);
        if (make_task->parsed()) return cmd_make_task(synth, task_dir);
        if (train_cmd->parsed()) {
            tf.tc.stop_when_perfect = !no_early_stop;
            return cmd_train(tf);
        }
        if (mine->parsed()) {
            (void)mine_seed;  // mining is deterministic; the flag keeps runs self-describing
            return cmd_mine(mine_ckpt, mine_corpus, mine_dataset, mine_out, mine_top_n,
                            mine_combine, mine_threads);
        }
        if (embed_cmd->parsed())
            return cmd_embed(embed_ckpt, embed_corpus_path, embed_out, embed_threads);
        if (search->parsed()) return cmd_search(sf);
        if (eval_cmd->parsed()) return cmd_eval(ef);
        if (tune->parsed()) return cmd_tune_alpha(uf);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        json err{{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json err{{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
