#include "taser/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace taser {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'T', 'A', 'S', 'R', 'C', 'K', '1', '\0'};

json config_to_json(const EncoderConfig& c) {
    return json{{"vocab_size", c.vocab_size},
                {"max_positions", c.max_positions},
                {"type_vocab_size", c.type_vocab_size},
                {"d_model", c.d_model},
                {"ffn_inner", c.ffn_inner},
                {"num_heads", c.num_heads},
                {"num_blocks", c.num_blocks},
                {"interleave_period", c.interleave_period},
                {"num_experts", c.num_experts},
                {"routing", to_string(c.routing)},
                {"include_pooler", c.include_pooler}};
}

EncoderConfig config_from_json(const json& j) {
    EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_positions = j.at("max_positions").get<int>();
    c.type_vocab_size = j.at("type_vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.ffn_inner = j.at("ffn_inner").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.num_blocks = j.at("num_blocks").get<int>();
    c.interleave_period = j.at("interleave_period").get<int>();
    c.num_experts = j.at("num_experts").get<int>();
    c.routing = routing_kind_from_string(j.at("routing").get<std::string>());
    c.include_pooler = j.at("include_pooler").get<bool>();
    return c;
}

struct Fnv1a {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    void update(const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            hash ^= bytes[i];
            hash *= 0x100000001B3ULL;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
};

}  // namespace

void save_checkpoint(const std::string& path, const TaserEncoder& encoder, const Vocab& vocab) {
    auto named = encoder.named_parameters();
    json header;
    header["config"] = config_to_json(encoder.config);
    header["vocab"] = vocab.terms;
    json tensors = json::array();
    for (const auto& [name, t] : named) {
        json entry{{"name", name}, {"shape", t.shape()}};
        tensors.push_back(std::move(entry));
    }
    header["tensors"] = std::move(tensors);
    std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof kMagic);
    std::uint64_t len = header_str.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : named)
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint header");
    json header = json::parse(header_str);

    Checkpoint ckpt;
    EncoderConfig config = config_from_json(header.at("config"));
    Rng init_rng(0, 0);
    ckpt.encoder = init_encoder(config, init_rng);
    ckpt.vocab = Vocab::from_terms(header.at("vocab").get<std::vector<std::string>>());

    auto named = ckpt.encoder.named_parameters();
    const json& tensors = header.at("tensors");
    if (tensors.size() != named.size())
        throw std::runtime_error(path + ": checkpoint lists " + std::to_string(tensors.size()) +
                                 " tensors, architecture has " + std::to_string(named.size()));
    for (std::size_t i = 0; i < named.size(); ++i) {
        const json& entry = tensors[i];
        auto& [name, t] = named[i];
        if (entry.at("name").get<std::string>() != name)
            throw std::runtime_error(path + ": tensor order mismatch at '" + name + "'");
        Shape shape = entry.at("shape").get<Shape>();
        if (shape != t.shape())
            throw std::runtime_error(path + ": shape mismatch for '" + name + "': file has " +
                                     shape_str(shape) + ", architecture has " +
                                     shape_str(t.shape()));
        in.read(reinterpret_cast<char*>(t.mutable_data().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error(path + ": truncated checkpoint payload");
    return ckpt;
}

std::uint64_t encoder_fingerprint(const TaserEncoder& encoder, const Vocab& vocab) {
    Fnv1a fnv;
    std::string config_str = config_to_json(encoder.config).dump();
    fnv.update(config_str);
    for (const std::string& term : vocab.terms) {
        fnv.update(term);
        fnv.update("\x1f", 1);
    }
    for (const auto& [name, t] : encoder.named_parameters()) {
        fnv.update(name);
        fnv.update(t.data().data(), t.size() * sizeof(double));
    }
    return fnv.hash;
}

}  // namespace taser
