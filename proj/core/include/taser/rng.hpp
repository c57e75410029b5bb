#pragma once

#include <cstdint>
#include <vector>

namespace taser {

/// Deterministic pseudo-random source keyed by (seed, stream).
///
/// The same (seed, stream) pair always produces the same draw sequence,
/// independent of platform and standard library, so Gumbel noise,
/// initialization, and shuffles are bit-reproducible. Distinct streams
/// derived from one seed are decorrelated and can be consumed by
/// independent workers.
class Rng {
public:
    Rng() : Rng(0, 0) {}
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// A new generator with the same seed and a derived stream id.
    Rng substream(std::uint64_t id) const;

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in the open interval (0, 1); safe under log().
    double uniform_open();
    /// Uniform integer in [0, n), n > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();
    /// Normal(0, sigma^2) rejected outside [-clip*sigma, clip*sigma].
    double trunc_normal(double sigma, double clip = 2.0);
    /// Standard Gumbel(0, 1).
    double gumbel();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t state_ = 0;
    bool have_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace taser
