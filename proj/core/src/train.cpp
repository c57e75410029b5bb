#include "taser/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "taser/dense.hpp"
#include "taser/metrics.hpp"

namespace taser {

void TrainConfig::validate() const {
    if (batch_size < 1 || epochs < 1 || eval_every < 1 || eval_k < 1 ||
        max_negatives_per_question < 0 || embed_threads < 1)
        throw std::invalid_argument("TrainConfig: counts must be positive");
    if (!(lr > 0.0) || !(gumbel_tau > 0.0) || !(adam_eps > 0.0))
        throw std::invalid_argument("TrainConfig: lr, tau and eps must be positive");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
        throw std::invalid_argument("TrainConfig: Adam betas must lie in [0, 1)");
}

namespace {

std::vector<TrainExample> build_examples(const Dataset& dataset, const Vocab& vocab,
                                         const Corpus& corpus, const TrainConfig& config,
                                         int max_positions) {
    std::vector<TrainExample> examples;
    examples.reserve(dataset.size());
    for (const DatasetRecord& rec : dataset.records) {
        if (rec.positive_ids.empty())
            throw std::invalid_argument("train: question " + std::to_string(rec.id) +
                                        " has no positive passage");
        TrainExample ex;
        ex.question_ids = vocab.encode(rec.question, max_positions);
        ex.positive = rec.positive_ids.front();
        ex.all_positives = rec.positive_ids;
        for (int neg : rec.negative_ids) {
            if (static_cast<int>(ex.negatives.size()) >= config.max_negatives_per_question)
                break;
            (void)corpus.by_id(neg);
            ex.negatives.push_back(neg);
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

double dev_recall(const TaserEncoder& enc, const Vocab& vocab, const Corpus& corpus,
                  const Dataset& dev_set, const TrainConfig& config) {
    DenseIndex index = embed_corpus(enc, vocab, corpus, config.embed_threads);
    std::vector<RankedList> lists;
    lists.reserve(dev_set.size());
    for (const DatasetRecord& rec : dev_set.records) {
        std::vector<double> q = encode_query(enc, vocab, rec.question);
        lists.push_back(dense_topk(index, q, config.eval_k, rec.id));
    }
    return recall_at_k(lists, answers_from_dataset(dev_set), corpus, config.eval_k).score;
}

struct ParamSnapshot {
    std::vector<std::vector<double>> values;

    static ParamSnapshot capture(const std::vector<Tensor>& params) {
        ParamSnapshot snap;
        snap.values.reserve(params.size());
        for (const Tensor& p : params)
            snap.values.emplace_back(p.data().begin(), p.data().end());
        return snap;
    }
    void restore(std::vector<Tensor>& params) const {
        for (std::size_t i = 0; i < params.size(); ++i) {
            std::span<double> w = params[i].mutable_data();
            std::copy(values[i].begin(), values[i].end(), w.begin());
        }
    }
};

}  // namespace

TrainResult train(TaserEncoder& enc, const Dataset& train_set, const Dataset& dev_set,
                  const Corpus& corpus, const Vocab& vocab, const TrainConfig& config) {
    config.validate();
    if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
    if (dev_set.size() == 0) throw std::invalid_argument("train: empty dev set");

    std::vector<TrainExample> examples =
        build_examples(train_set, vocab, corpus, config, enc.config.max_positions);
    std::vector<Tensor> params = enc.parameters();
    AdamState adam(params);
    AdamConfig adam_cfg{config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps};
    bool learned_routing =
        enc.config.routing == RoutingKind::Seq || enc.config.routing == RoutingKind::Tok;

    Rng shuffle_rng = Rng(config.seed, 101);
    TrainResult result;
    result.best_dev_recall = -1.0;
    ParamSnapshot best = ParamSnapshot::capture(params);

    std::vector<std::size_t> perm(examples.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(perm);
        double sum_l_sim = 0.0, sum_l_ent = 0.0;
        std::size_t num_batches = 0;

        for (std::size_t start = 0; start < perm.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::size_t stop =
                std::min(perm.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<TrainExample> batch;
            for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[perm[i]]);
            std::vector<std::vector<int>> negatives = in_batch_negatives(batch);

            // Encode every distinct passage in the batch once.
            std::set<int> pid_set;
            for (const TrainExample& ex : batch) pid_set.insert(ex.positive);
            for (const std::vector<int>& negs : negatives) pid_set.insert(negs.begin(), negs.end());

            Rng batch_rng =
                Rng(config.seed, 9000).substream(static_cast<std::uint64_t>(epoch) * 1048576 +
                                                 num_batches);
            std::unordered_map<int, Tensor> passage_vec;
            for (int pid : pid_set) {
                std::vector<int> ids =
                    vocab.encode(corpus.full_text(pid), enc.config.max_positions);
                passage_vec.emplace(
                    pid, encode(enc, ids, InputKind::Passage, RunMode::Train, batch_rng,
                                config.gumbel_tau)
                             .cls);
            }

            std::vector<Tensor> per_question_losses;
            std::vector<RoutingRecord> routing_records;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                EncodeResult qr = encode(enc, batch[i].question_ids, InputKind::Question,
                                         RunMode::Train, batch_rng, config.gumbel_tau);
                for (RoutingRecord& rec : qr.records) routing_records.push_back(std::move(rec));
                std::vector<Tensor> neg_vecs;
                neg_vecs.reserve(negatives[i].size());
                for (int pid : negatives[i]) neg_vecs.push_back(passage_vec.at(pid));
                per_question_losses.push_back(
                    contrastive_loss(qr.cls, passage_vec.at(batch[i].positive), neg_vecs));
            }

            Tensor l_sim = mean(stack_scalars(per_question_losses));
            Tensor l_ent = Tensor::scalar(0.0);
            if (learned_routing && !routing_records.empty())
                l_ent = entropy_regularizer(routing_records);
            Tensor loss = joint_loss(l_sim, l_ent, learned_routing ? config.beta_entropy : 0.0);

            if (std::isnan(loss.item()) || std::isinf(loss.item()))
                throw std::runtime_error("train: loss diverged at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(num_batches) + " (value " +
                                         std::to_string(loss.item()) + ")");

            enc.zero_grads();
            loss.backward();
            adam_step(params, adam, adam_cfg);

            sum_l_sim += l_sim.item();
            sum_l_ent += l_ent.item();
            ++num_batches;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.mean_l_sim = sum_l_sim / static_cast<double>(num_batches);
        entry.mean_l_ent = sum_l_ent / static_cast<double>(num_batches);

        bool evaluate = (epoch % config.eval_every == 0) || epoch == config.epochs;
        if (evaluate) {
            double r = dev_recall(enc, vocab, corpus, dev_set, config);
            entry.dev_recall = r;
            if (r > result.best_dev_recall) {
                result.best_dev_recall = r;
                result.best_epoch = epoch;
                best = ParamSnapshot::capture(params);
            }
        }
        result.log.push_back(entry);
        if (evaluate && config.stop_when_perfect && *entry.dev_recall >= 1.0) break;
    }

    best.restore(params);
    if (result.best_dev_recall < 0.0) result.best_dev_recall = 0.0;
    return result;
}

std::map<int, std::vector<int>> mine_hard_negatives(const TaserEncoder& enc, const Vocab& vocab,
                                                    const Corpus& corpus,
                                                    const Dataset& questions, int top_n,
                                                    int embed_threads) {
    if (top_n < 1) throw std::invalid_argument("mine_hard_negatives: top_n must be >= 1");
    DenseIndex index = embed_corpus(enc, vocab, corpus, embed_threads);
    std::map<int, std::vector<int>> mined;
    for (const DatasetRecord& rec : questions.records) {
        if (rec.positive_ids.empty()) {
            std::cerr << "warning: question " << rec.id
                      << " has no gold passage, skipped by miner\n";
            continue;
        }
        std::set<int> gold(rec.positive_ids.begin(), rec.positive_ids.end());
        std::vector<double> q = encode_query(enc, vocab, rec.question);
        // Over-fetch so removals of gold passages still leave top_n.
        int fetch = std::min<int>(static_cast<int>(corpus.size()),
                                  top_n + static_cast<int>(gold.size()));
        RankedList ranked = dense_topk(index, q, fetch, rec.id);
        std::vector<int> negs;
        for (const ScoredDoc& item : ranked.items) {
            if (gold.count(item.doc_id)) continue;
            negs.push_back(item.doc_id);
            if (static_cast<int>(negs.size()) == top_n) break;
        }
        mined[rec.id] = std::move(negs);
    }
    return mined;
}

std::map<int, int> bm25_hard_negatives(const InvertedIndex& index, const Corpus& corpus,
                                       const Dataset& questions) {
    std::map<int, int> out;
    for (const DatasetRecord& rec : questions.records) {
        std::set<int> gold(rec.positive_ids.begin(), rec.positive_ids.end());
        std::vector<std::string> needles;
        for (const std::string& a : rec.answers) needles.push_back(normalize_text(a));
        RankedList ranked =
            index.topk(rec.question, static_cast<int>(corpus.size()), {}, rec.id);
        for (const ScoredDoc& item : ranked.items) {
            if (gold.count(item.doc_id)) continue;
            std::string text = normalize_text(corpus.full_text(item.doc_id));
            bool contains = false;
            for (const std::string& needle : needles)
                if (!needle.empty() && text.find(needle) != std::string::npos) {
                    contains = true;
                    break;
                }
            if (!contains) {
                out[rec.id] = item.doc_id;
                break;
            }
        }
    }
    return out;
}

Dataset attach_negatives(const Dataset& dataset, const std::map<int, std::vector<int>>& mined,
                         bool combine) {
    Dataset out = dataset;
    for (DatasetRecord& rec : out.records) {
        auto it = mined.find(rec.id);
        if (it == mined.end()) continue;
        if (combine) {
            std::set<int> seen(rec.negative_ids.begin(), rec.negative_ids.end());
            for (int id : it->second)
                if (seen.insert(id).second) rec.negative_ids.push_back(id);
        } else {
            rec.negative_ids = it->second;
        }
    }
    return out;
}

}  // namespace taser
