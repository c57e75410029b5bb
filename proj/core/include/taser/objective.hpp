#pragma once

#include <span>
#include <vector>

#include "taser/tensor.hpp"

namespace taser {

/// Relevance of a question/passage vector pair: plain dot product.
Tensor sim(const Tensor& q, const Tensor& p);
double sim(std::span<const double> q, std::span<const double> p);

/// Negative log-softmax of the positive among {positive} union negatives,
/// computed log-sum-exp stably. Exactly zero when there are no negatives.
Tensor contrastive_loss(const Tensor& q, const Tensor& p_pos,
                        const std::vector<Tensor>& negatives);

/// l_sim + beta * l_ent.
Tensor joint_loss(const Tensor& l_sim, const Tensor& l_ent, double beta);

struct TrainExample {
    std::vector<int> question_ids;  // tokenized, CLS-prefixed
    int positive = -1;              // the passage trained against
    std::vector<int> all_positives; // every gold passage, for exclusion
    std::vector<int> negatives;     // explicit hard negatives (P1 or P2)
};

/// Per-example negative sets for a mini-batch: explicit negatives plus the
/// other examples' positives, deduplicated, with every gold passage of the
/// example itself excluded so no passage is positive and negative at once.
std::vector<std::vector<int>> in_batch_negatives(std::span<const TrainExample> batch);

}  // namespace taser
