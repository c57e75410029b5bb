#include "taser/encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace taser {

std::string to_string(RoutingKind k) {
    switch (k) {
        case RoutingKind::Shared: return "shared";
        case RoutingKind::Det: return "det";
        case RoutingKind::Seq: return "seq";
        case RoutingKind::Tok: return "tok";
    }
    return "?";
}

RoutingKind routing_kind_from_string(const std::string& s) {
    if (s == "shared") return RoutingKind::Shared;
    if (s == "det") return RoutingKind::Det;
    if (s == "seq") return RoutingKind::Seq;
    if (s == "tok") return RoutingKind::Tok;
    throw std::invalid_argument("unknown routing kind: " + s);
}

void EncoderConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0)
            throw std::invalid_argument(std::string("EncoderConfig: ") + name +
                                        " must be positive, got " + std::to_string(v));
    };
    positive(vocab_size, "vocab_size");
    positive(max_positions, "max_positions");
    positive(type_vocab_size, "type_vocab_size");
    positive(d_model, "d_model");
    positive(ffn_inner, "ffn_inner");
    positive(num_heads, "num_heads");
    positive(num_blocks, "num_blocks");
    positive(interleave_period, "interleave_period");
    positive(num_experts, "num_experts");
    if (d_model % num_heads != 0)
        throw std::invalid_argument("EncoderConfig: d_model " + std::to_string(d_model) +
                                    " not divisible by num_heads " + std::to_string(num_heads));
    if (routing == RoutingKind::Shared && num_experts != 1)
        throw std::invalid_argument("EncoderConfig: shared routing requires num_experts = 1");
    if (routing == RoutingKind::Det && num_experts != 2)
        throw std::invalid_argument("EncoderConfig: det routing requires num_experts = 2");
}

EncoderConfig EncoderConfig::bert_base(RoutingKind routing, int num_experts) {
    EncoderConfig cfg;
    cfg.vocab_size = 30522;
    cfg.max_positions = 512;
    cfg.type_vocab_size = 2;
    cfg.d_model = 768;
    cfg.ffn_inner = 3072;
    cfg.num_heads = 12;
    cfg.num_blocks = 12;
    cfg.interleave_period = 2;
    cfg.num_experts = num_experts;
    cfg.routing = routing;
    cfg.include_pooler = true;
    return cfg;
}

int BlockLayout::num_specialized() const {
    int n = 0;
    for (bool s : specialized) n += s ? 1 : 0;
    return n;
}

BlockLayout build_layout(int num_blocks, int interleave_period) {
    if (num_blocks < 1 || interleave_period < 1)
        throw std::invalid_argument("build_layout: num_blocks and period must be >= 1");
    BlockLayout layout;
    layout.specialized.resize(static_cast<std::size_t>(num_blocks));
    for (int i = 1; i <= num_blocks; ++i)
        layout.specialized[static_cast<std::size_t>(i - 1)] = (i % (interleave_period + 1) == 0);
    return layout;
}

namespace {

Tensor weight(Shape shape, Rng& rng) {
    return Tensor::trunc_normal(std::move(shape), rng, 0.02).set_requires_grad(true);
}

Tensor zeros_param(Shape shape) {
    return Tensor::zeros(std::move(shape)).set_requires_grad(true);
}

Tensor ones_param(Shape shape) {
    return Tensor::full(std::move(shape), 1.0).set_requires_grad(true);
}

FfnParams init_ffn(int d, int m, Rng& rng) {
    return {weight({m, d}, rng), zeros_param({m}), weight({d, m}, rng), zeros_param({d})};
}

}  // namespace

TaserEncoder init_encoder(const EncoderConfig& config, Rng& rng) {
    config.validate();
    const int d = config.d_model;
    TaserEncoder enc;
    enc.config = config;
    enc.tok_emb = weight({config.vocab_size, d}, rng);
    enc.pos_emb = weight({config.max_positions, d}, rng);
    enc.type_emb = weight({config.type_vocab_size, d}, rng);
    enc.emb_ln_gain = ones_param({d});
    enc.emb_ln_bias = zeros_param({d});

    BlockLayout layout = build_layout(config.num_blocks, config.interleave_period);
    for (int b = 0; b < config.num_blocks; ++b) {
        Block block;
        block.specialized = layout.specialized[static_cast<std::size_t>(b)];
        block.attn = {weight({d, d}, rng), zeros_param({d}), weight({d, d}, rng),
                      zeros_param({d}), weight({d, d}, rng), zeros_param({d}),
                      weight({d, d}, rng), zeros_param({d})};
        block.ln1_gain = ones_param({d});
        block.ln1_bias = zeros_param({d});
        block.ln2_gain = ones_param({d});
        block.ln2_bias = zeros_param({d});
        int experts = block.specialized ? config.num_experts : 1;
        for (int e = 0; e < experts; ++e)
            block.experts.push_back(init_ffn(d, config.ffn_inner, rng));
        if (block.specialized &&
            (config.routing == RoutingKind::Seq || config.routing == RoutingKind::Tok)) {
            block.router = RouterParams{weight({config.num_experts, d}, rng),
                                        zeros_param({config.num_experts})};
        }
        enc.blocks.push_back(std::move(block));
    }
    if (config.include_pooler)
        enc.pooler = PoolerParams{weight({d, d}, rng), zeros_param({d})};
    return enc;
}

std::vector<std::pair<std::string, Tensor>> TaserEncoder::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embeddings.token", tok_emb);
    out.emplace_back("embeddings.position", pos_emb);
    out.emplace_back("embeddings.type", type_emb);
    out.emplace_back("embeddings.ln_gain", emb_ln_gain);
    out.emplace_back("embeddings.ln_bias", emb_ln_bias);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const Block& blk = blocks[b];
        std::string p = "block" + std::to_string(b) + ".";
        out.emplace_back(p + "attn.wq", blk.attn.wq);
        out.emplace_back(p + "attn.bq", blk.attn.bq);
        out.emplace_back(p + "attn.wk", blk.attn.wk);
        out.emplace_back(p + "attn.bk", blk.attn.bk);
        out.emplace_back(p + "attn.wv", blk.attn.wv);
        out.emplace_back(p + "attn.bv", blk.attn.bv);
        out.emplace_back(p + "attn.wo", blk.attn.wo);
        out.emplace_back(p + "attn.bo", blk.attn.bo);
        out.emplace_back(p + "ln1_gain", blk.ln1_gain);
        out.emplace_back(p + "ln1_bias", blk.ln1_bias);
        out.emplace_back(p + "ln2_gain", blk.ln2_gain);
        out.emplace_back(p + "ln2_bias", blk.ln2_bias);
        for (std::size_t e = 0; e < blk.experts.size(); ++e) {
            std::string q = p + "expert" + std::to_string(e) + ".";
            out.emplace_back(q + "w1", blk.experts[e].w1);
            out.emplace_back(q + "b1", blk.experts[e].b1);
            out.emplace_back(q + "w2", blk.experts[e].w2);
            out.emplace_back(q + "b2", blk.experts[e].b2);
        }
        if (blk.router) {
            out.emplace_back(p + "router.a", blk.router->a);
            out.emplace_back(p + "router.c", blk.router->c);
        }
    }
    if (pooler) {
        out.emplace_back("pooler.w", pooler->w);
        out.emplace_back("pooler.b", pooler->b);
    }
    return out;
}

std::vector<Tensor> TaserEncoder::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

void TaserEncoder::zero_grads() const {
    for (Tensor& t : parameters()) t.zero_grad();
}

Tensor ffn_forward(const FfnParams& ffn, const Tensor& h) {
    if (h.rank() == 1) {
        Tensor hidden = relu(add(matvec(ffn.w1, h), ffn.b1));
        return add(matvec(ffn.w2, hidden), ffn.b2);
    }
    if (h.rank() == 2) {
        Tensor hidden = relu(add_rowvec(matmul(h, transpose(ffn.w1)), ffn.b1));
        return add_rowvec(matmul(hidden, transpose(ffn.w2)), ffn.b2);
    }
    throw std::invalid_argument("ffn_forward: rank 1 or 2 input required, got " +
                                shape_str(h.shape()));
}

namespace {

constexpr double kLnEps = 1e-12;

Tensor attention_forward(const AttentionParams& p, const Tensor& hidden, int num_heads) {
    const int d = hidden.dim(1);
    const int hd = d / num_heads;
    Tensor q = add_rowvec(matmul(hidden, transpose(p.wq)), p.bq);
    Tensor k = add_rowvec(matmul(hidden, transpose(p.wk)), p.bk);
    Tensor v = add_rowvec(matmul(hidden, transpose(p.wv)), p.bv);
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
        Tensor qh = slice_cols(q, h * hd, hd);
        Tensor kh = slice_cols(k, h * hd, hd);
        Tensor vh = slice_cols(v, h * hd, hd);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);  // [n x n]
        Tensor attn = softmax(scores, 1);
        heads.push_back(matmul(attn, vh));  // [n x hd]
    }
    Tensor ctx = num_heads == 1 ? heads[0] : concat_cols(heads);
    return add_rowvec(matmul(ctx, transpose(p.wo)), p.bo);
}

Tensor specialized_ffn_forward(const TaserEncoder& enc, const Block& block, const Tensor& h1,
                               InputKind kind, RunMode mode, Rng& rng,
                               std::vector<RoutingRecord>* records, int block_index,
                               double temperature) {
    switch (enc.config.routing) {
        case RoutingKind::Shared:
            return ffn_forward(block.experts[0], h1);
        case RoutingKind::Det:
            return ffn_forward(block.experts[route_det(kind)], h1);
        case RoutingKind::Seq: {
            RouteResult r = route_seq(*block.router, row(h1, 0), mode, rng, temperature);
            if (records) {
                RoutingRecord rec;
                rec.block_index = block_index;
                rec.logits.push_back(r.logits);
                records->push_back(std::move(rec));
            }
            Tensor out = ffn_forward(block.experts[static_cast<std::size_t>(r.selected)], h1);
            // Forward gate is exactly 1; backward reaches a, c through the
            // straight-through estimator.
            return scale_by(out, pick(r.onehot, r.selected));
        }
        case RoutingKind::Tok: {
            RoutingRecord rec;
            rec.block_index = block_index;
            std::vector<Tensor> rows_out;
            for (int j = 0; j < h1.dim(0); ++j) {
                Tensor hj = row(h1, j);
                RouteResult r = route_tok(*block.router, hj, mode, rng, temperature);
                rec.logits.push_back(r.logits);
                Tensor fj = ffn_forward(block.experts[static_cast<std::size_t>(r.selected)], hj);
                rows_out.push_back(scale_by(fj, pick(r.onehot, r.selected)));
            }
            if (records) records->push_back(std::move(rec));
            return stack_rows(rows_out);
        }
    }
    throw std::logic_error("unreachable routing kind");
}

}  // namespace

Tensor block_forward(const TaserEncoder& enc, const Block& block, const Tensor& hidden,
                     InputKind kind, RunMode mode, Rng& rng,
                     std::vector<RoutingRecord>* records, int block_index, double temperature) {
    Tensor attn_out = attention_forward(block.attn, hidden, enc.config.num_heads);
    Tensor h1 = layer_norm(add(hidden, attn_out), block.ln1_gain, block.ln1_bias, kLnEps);
    Tensor ffn_out =
        block.specialized
            ? specialized_ffn_forward(enc, block, h1, kind, mode, rng, records, block_index,
                                      temperature)
            : ffn_forward(block.experts[0], h1);
    return layer_norm(add(h1, ffn_out), block.ln2_gain, block.ln2_bias, kLnEps);
}

EncodeResult encode(const TaserEncoder& enc, std::span<const int> token_ids, InputKind kind,
                    RunMode mode, Rng& rng, double temperature) {
    const int n = static_cast<int>(token_ids.size());
    if (n == 0 || token_ids[0] != 0)
        throw std::invalid_argument("encode: sequence must begin with the CLS token id (0)");
    if (n > enc.config.max_positions)
        throw std::invalid_argument("encode: sequence length " + std::to_string(n) +
                                    " exceeds max_positions " +
                                    std::to_string(enc.config.max_positions));

    std::vector<int> positions(static_cast<std::size_t>(n));
    std::iota(positions.begin(), positions.end(), 0);
    std::vector<int> types(static_cast<std::size_t>(n), 0);

    Tensor h = add(add(embedding(enc.tok_emb, token_ids), embedding(enc.pos_emb, positions)),
                   embedding(enc.type_emb, types));
    h = layer_norm(h, enc.emb_ln_gain, enc.emb_ln_bias, kLnEps);

    EncodeResult result;
    for (std::size_t b = 0; b < enc.blocks.size(); ++b)
        h = block_forward(enc, enc.blocks[b], h, kind, mode, rng, &result.records,
                          static_cast<int>(b), temperature);
    result.cls = row(h, 0);
    return result;
}

std::int64_t count_params(const EncoderConfig& config) {
    config.validate();
    const std::int64_t d = config.d_model;
    const std::int64_t m = config.ffn_inner;
    std::int64_t total = 0;
    total += (static_cast<std::int64_t>(config.vocab_size) + config.max_positions +
              config.type_vocab_size) * d;
    total += 2 * d;  // embedding layer-norm
    const std::int64_t ffn = (d * m + m) + (m * d + d);
    const std::int64_t per_block_common = 4 * (d * d + d) + 2 * (2 * d);
    BlockLayout layout = build_layout(config.num_blocks, config.interleave_period);
    bool learned_router =
        config.routing == RoutingKind::Seq || config.routing == RoutingKind::Tok;
    for (bool specialized : layout.specialized) {
        total += per_block_common;
        total += specialized ? config.num_experts * ffn : ffn;
        if (specialized && learned_router) total += d * config.num_experts + config.num_experts;
    }
    if (config.include_pooler) total += d * d + d;
    return total;
}

std::int64_t count_params_bi_encoder(const EncoderConfig& config) {
    EncoderConfig plain = config;
    plain.routing = RoutingKind::Shared;
    plain.num_experts = 1;
    return 2 * count_params(plain);
}

}  // namespace taser
