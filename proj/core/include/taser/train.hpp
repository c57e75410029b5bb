#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "taser/bm25.hpp"
#include "taser/data.hpp"
#include "taser/encoder.hpp"
#include "taser/objective.hpp"
#include "taser/optim.hpp"

namespace taser {

struct TrainConfig {
    int batch_size = 16;
    int epochs = 60;
    double lr = 1e-3;
    /// Weight of the entropy term for learned routing; sign selectable.
    double beta_entropy = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    double gumbel_tau = 1.0;
    /// Dev recall is evaluated every this many epochs (and on the last).
    int eval_every = 1;
    int eval_k = 5;
    /// Explicit negatives per question per batch; mined lists keep hardest-first order.
    int max_negatives_per_question = 4;
    /// Stop once dev recall reaches 1.0; the best checkpoint is kept either way.
    bool stop_when_perfect = true;
    int embed_threads = 1;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double mean_l_sim = 0.0;
    double mean_l_ent = 0.0;
    std::optional<double> dev_recall;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double best_dev_recall = 0.0;
    int best_epoch = 0;
};

/// Contrastive training with in-batch negatives. Per epoch the train set is
/// shuffled into mini-batches; every batch encodes its questions and unique
/// candidate passages once, assembles the softmax loss per question, adds
/// beta * L_ent for learned routing, and takes an Adam step. The encoder is
/// left at the checkpoint with the best dev recall@k.
TrainResult train(TaserEncoder& enc, const Dataset& train_set, const Dataset& dev_set,
                  const Corpus& corpus, const Vocab& vocab, const TrainConfig& config);

/// Dense top-n retrieval per question with every gold passage removed.
/// Questions without positives are skipped with a warning.
std::map<int, std::vector<int>> mine_hard_negatives(const TaserEncoder& enc, const Vocab& vocab,
                                                    const Corpus& corpus,
                                                    const Dataset& questions, int top_n,
                                                    int embed_threads = 1);

/// First-round negatives: per question, the top BM25 passage that does not
/// contain any answer string and is not gold. Questions with no such
/// passage get no negative.
std::map<int, int> bm25_hard_negatives(const InvertedIndex& index, const Corpus& corpus,
                                       const Dataset& questions);

/// Applies mined negatives to a dataset. With combine = true the mined ids
/// are appended to the existing ones (deduplicated), otherwise they replace
/// them. Questions absent from `mined` keep their negatives unchanged.
Dataset attach_negatives(const Dataset& dataset, const std::map<int, std::vector<int>>& mined,
                         bool combine);

}  // namespace taser
