#include "taser/routing.hpp"

#include <cmath>
#include <stdexcept>

namespace taser {

std::size_t route_det(InputKind kind) {
    return kind == InputKind::Question ? 0 : 1;
}

namespace {

RouteResult route_learned(const RouterParams& router, const Tensor& u, RunMode mode, Rng& rng,
                          double temperature) {
    Tensor logits = add(matvec(router.a, u), router.c);
    Tensor onehot = gumbel_softmax_hard(logits, temperature, rng, mode);
    int selected = 0;
    for (int i = 0; i < onehot.dim(0); ++i)
        if (onehot.at(i) == 1.0) selected = i;
    return {onehot, logits, selected};
}

}  // namespace

RouteResult route_seq(const RouterParams& router, const Tensor& h_cls, RunMode mode, Rng& rng,
                      double temperature) {
    return route_learned(router, h_cls, mode, rng, temperature);
}

RouteResult route_tok(const RouterParams& router, const Tensor& h_tok, RunMode mode, Rng& rng,
                      double temperature) {
    return route_learned(router, h_tok, mode, rng, temperature);
}

Tensor entropy_regularizer(const std::vector<RoutingRecord>& records) {
    std::vector<Tensor> entropies;
    for (const RoutingRecord& rec : records) {
        for (const Tensor& z : rec.logits) {
            // H = -sum p_i log p_i from the noise-free logits, computed via
            // log-softmax so a dominated expert contributes exactly 0.
            Tensor lse = logsumexp(z);
            Tensor logp = sub(z, stack_scalars(std::vector<Tensor>(z.size(), lse)));
            Tensor p = exp(logp);
            entropies.push_back(neg(sum(mul(p, logp))));
        }
    }
    if (entropies.empty())
        throw std::invalid_argument("entropy_regularizer: no routing records");
    return mean(stack_scalars(entropies));
}

}  // namespace taser
