#pragma once

#include <cstdint>
#include <string>

#include "taser/data.hpp"
#include "taser/encoder.hpp"

namespace taser {

struct Checkpoint {
    TaserEncoder encoder;
    Vocab vocab;
};

/// Self-describing binary container: a JSON header naming the config, the
/// vocabulary, and every parameter tensor's shape, followed by the raw f64
/// payloads. Round-trips bitwise.
void save_checkpoint(const std::string& path, const TaserEncoder& encoder, const Vocab& vocab);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over the canonical config, vocabulary, and parameter bytes; binds
/// dense indexes to the encoder that produced them.
std::uint64_t encoder_fingerprint(const TaserEncoder& encoder, const Vocab& vocab);

}  // namespace taser
