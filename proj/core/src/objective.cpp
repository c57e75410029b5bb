#include "taser/objective.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace taser {

Tensor sim(const Tensor& q, const Tensor& p) { return dot(q, p); }

double sim(std::span<const double> q, std::span<const double> p) {
    if (q.size() != p.size())
        throw std::invalid_argument("sim: dimension mismatch: " + std::to_string(q.size()) +
                                    " vs " + std::to_string(p.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += q[i] * p[i];
    return acc;
}

Tensor contrastive_loss(const Tensor& q, const Tensor& p_pos,
                        const std::vector<Tensor>& negatives) {
    std::vector<Tensor> scores;
    scores.reserve(negatives.size() + 1);
    scores.push_back(sim(q, p_pos));
    for (const Tensor& n : negatives) scores.push_back(sim(q, n));
    Tensor all = stack_scalars(scores);
    return sub(logsumexp(all), pick(all, 0));
}

Tensor joint_loss(const Tensor& l_sim, const Tensor& l_ent, double beta) {
    return add(l_sim, scale(l_ent, beta));
}

std::vector<std::vector<int>> in_batch_negatives(std::span<const TrainExample> batch) {
    std::vector<std::vector<int>> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::unordered_set<int> own(batch[i].all_positives.begin(),
                                    batch[i].all_positives.end());
        own.insert(batch[i].positive);
        std::unordered_set<int> seen;
        std::vector<int>& negs = out[i];
        for (int id : batch[i].negatives)
            if (!own.count(id) && seen.insert(id).second) negs.push_back(id);
        std::vector<int> others;
        for (std::size_t j = 0; j < batch.size(); ++j)
            if (j != i) others.push_back(batch[j].positive);
        std::sort(others.begin(), others.end());
        for (int id : others)
            if (!own.count(id) && seen.insert(id).second) negs.push_back(id);
    }
    return out;
}

}  // namespace taser
