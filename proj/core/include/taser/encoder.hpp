#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taser/routing.hpp"
#include "taser/tensor.hpp"

namespace taser {

enum class RoutingKind { Shared, Det, Seq, Tok };

std::string to_string(RoutingKind k);
RoutingKind routing_kind_from_string(const std::string& s);

struct EncoderConfig {
    int vocab_size = 0;
    int max_positions = 64;
    int type_vocab_size = 2;
    int d_model = 32;
    int ffn_inner = 128;
    int num_heads = 4;
    int num_blocks = 6;
    int interleave_period = 2;  // T: one specialized block after every T shared blocks
    int num_experts = 2;        // I
    RoutingKind routing = RoutingKind::Det;
    bool include_pooler = false;

    void validate() const;  // throws std::invalid_argument

    /// BERT-base dimensions with the given routing; used for parameter
    /// accounting against the published model sizes.
    static EncoderConfig bert_base(RoutingKind routing, int num_experts);
};

/// Which blocks in the stack are specialized. The stack starts with shared
/// blocks at the bottom; every (T+1)-th position is specialized, the
/// pattern truncating at num_blocks.
struct BlockLayout {
    std::vector<bool> specialized;
    int num_specialized() const;
};

BlockLayout build_layout(int num_blocks, int interleave_period);

struct FfnParams {
    Tensor w1;  // [m x d]
    Tensor b1;  // [m]
    Tensor w2;  // [d x m]
    Tensor b2;  // [d]
};

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // all [d x d] / [d]
};

struct Block {
    bool specialized = false;
    AttentionParams attn;
    Tensor ln1_gain, ln1_bias;
    Tensor ln2_gain, ln2_bias;
    std::vector<FfnParams> experts;       // one FFN in shared blocks, I in specialized ones
    std::optional<RouterParams> router;   // seq/tok routing only
};

struct PoolerParams {
    Tensor w;  // [d x d]
    Tensor b;  // [d]
};

struct TaserEncoder {
    EncoderConfig config;
    Tensor tok_emb;   // [vocab x d]
    Tensor pos_emb;   // [max_positions x d]
    Tensor type_emb;  // [type_vocab x d]
    Tensor emb_ln_gain, emb_ln_bias;
    std::vector<Block> blocks;
    std::optional<PoolerParams> pooler;

    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    void zero_grads() const;
};

/// Fresh encoder with truncated-normal(0.02) weights, zero biases, unit
/// layer-norm gains.
TaserEncoder init_encoder(const EncoderConfig& config, Rng& rng);

/// Eq-style feed-forward sub-layer: w2 * max{0, w1*h + b1} + b2, applied to
/// a single vector [d] or row-wise to [n x d].
Tensor ffn_forward(const FfnParams& ffn, const Tensor& h);

struct EncodeResult {
    Tensor cls;                           // [d], the top block's prefix-token output
    std::vector<RoutingRecord> records;   // nonempty only for seq/tok routing
};

/// One post-layer-norm Transformer block. Appends routing records for
/// learned routing when `records` is non-null.
Tensor block_forward(const TaserEncoder& enc, const Block& block, const Tensor& hidden,
                     InputKind kind, RunMode mode, Rng& rng,
                     std::vector<RoutingRecord>* records, int block_index,
                     double temperature = 1.0);

/// Full encode of a token-id sequence (must begin with the CLS id and fit
/// max_positions). Returns the final prefix-token vector plus the routing
/// logits recorded for the entropy regularizer.
EncodeResult encode(const TaserEncoder& enc, std::span<const int> token_ids, InputKind kind,
                    RunMode mode, Rng& rng, double temperature = 1.0);

/// Exact learnable-parameter count for a configuration.
std::int64_t count_params(const EncoderConfig& config);

/// The doubly parameterized baseline: two independent encoders of the same
/// dimensions with no specialization.
std::int64_t count_params_bi_encoder(const EncoderConfig& config);

}  // namespace taser
