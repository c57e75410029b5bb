#pragma once

#include <cstddef>
#include <vector>

#include "taser/tensor.hpp"

namespace taser {

enum class InputKind { Question, Passage };

/// Learned router of a specialized block: logits = a * u + c with
/// a in R^{I x d}, c in R^I. Deterministic routing has no parameters.
struct RouterParams {
    Tensor a;
    Tensor c;
    int num_experts() const { return c.dim(0); }
};

/// Pre-noise routing logits recorded during one forward pass, one entry per
/// routed unit (the sequence for Seq-R, each token for Tok-R). Feeds the
/// entropy regularizer.
struct RoutingRecord {
    int block_index = 0;
    std::vector<Tensor> logits;
};

struct RouteResult {
    Tensor onehot;  // exactly one entry equal to 1
    Tensor logits;  // pre-noise a*u + c, on the tape
    int selected = 0;
};

/// Deterministic routing: questions to expert 0 (Q-FFN), passages to
/// expert 1 (P-FFN). No parameters, no randomness.
std::size_t route_det(InputKind kind);

/// Sequence-level routing from the FFN-sublayer input of the prefix token;
/// every token in the sequence then uses the selected expert.
RouteResult route_seq(const RouterParams& router, const Tensor& h_cls, RunMode mode, Rng& rng,
                      double temperature = 1.0);

/// Token-level routing; each token is routed independently with its own
/// noise draws.
RouteResult route_tok(const RouterParams& router, const Tensor& h_tok, RunMode mode, Rng& rng,
                      double temperature = 1.0);

/// Mean entropy of the noise-free routing distributions softmax(a*u + c)
/// over every routed unit in every record. Differentiable; lies in
/// [0, ln I].
Tensor entropy_regularizer(const std::vector<RoutingRecord>& records);

}  // namespace taser
