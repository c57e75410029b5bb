#include "taser/rng.hpp"

#include <cmath>

namespace taser {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    state_ = mix64(seed + kGolden);
    state_ = mix64(state_ ^ mix64(stream + 0x42ULL));
}

Rng Rng::substream(std::uint64_t id) const {
    return Rng(seed_, mix64(stream_ + kGolden) ^ id);
}

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    // Lemire's multiply-shift; bias is unmeasurable at the draw counts used here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double Rng::normal() {
    if (have_spare_normal_) {
        have_spare_normal_ = false;
        return spare_normal_;
    }
    double u1 = uniform_open();
    double u2 = uniform_open();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_normal_ = r * std::sin(theta);
    have_spare_normal_ = true;
    return r * std::cos(theta);
}

double Rng::trunc_normal(double sigma, double clip) {
    for (;;) {
        double z = normal();
        if (std::abs(z) <= clip) return z * sigma;
    }
}

double Rng::gumbel() {
    return -std::log(-std::log(uniform_open()));
}

}  // namespace taser
