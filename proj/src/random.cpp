#include "mlmc/random.hpp"

#include "mlmc/errors.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace mlmc {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v, std::uint64_t depth) noexcept {
    return mix64(h ^ mix64(v + kGolden * (depth + 1)));
}

using NoPromote = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

}  // namespace

StreamKey::StreamKey(std::uint64_t seed) : seed_(seed), digest_(mix64(seed + kGolden)) {}

StreamKey::StreamKey(std::uint64_t seed, std::initializer_list<std::uint64_t> path) : StreamKey(seed) {
    for (auto p : path) {
        digest_ = combine(digest_, p, path_.size());
        path_.push_back(p);
    }
}

StreamKey derive(const StreamKey& parent, std::uint64_t child_index) {
    StreamKey child = parent;
    child.digest_ = combine(parent.digest_, child_index, parent.path_.size());
    child.path_.push_back(child_index);
    return child;
}

std::uint64_t philox_bits(std::uint64_t key, std::uint64_t counter) noexcept {
    constexpr std::uint32_t m0 = 0xD2511F53U;
    constexpr std::uint32_t m1 = 0xCD9E8D57U;
    constexpr std::uint32_t w0 = 0x9E3779B9U;
    constexpr std::uint32_t w1 = 0xBB67AE85U;

    std::uint32_t c0 = static_cast<std::uint32_t>(counter);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
    std::uint32_t c2 = 0;
    std::uint32_t c3 = 0;
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);

    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * c0;
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * c2;
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
        k0 += w0;
        k1 += w1;
    }
    return (static_cast<std::uint64_t>(c1) << 32) | c0;
}

double GaussianStream::uniform_at(std::uint64_t c) const noexcept {
    // 53 random bits, offset by half an ulp so 0 and 1 are never produced.
    const std::uint64_t bits = philox_bits(digest_, c) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double GaussianStream::normal_at(std::uint64_t c) const { return normal_quantile(uniform_at(c)); }

constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi * kInvSqrt2);
}

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw InvalidInput("normal_quantile: argument must lie in (0, 1)");
    }
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u, NoPromote());
}

double brownian_bridge_midpoint(double w_left, double w_right, double t_left, double t_right, double z) {
    if (!(t_left < t_right)) {
        throw InvalidInterval("brownian_bridge_midpoint: t_left must be < t_right");
    }
    return 0.5 * (w_left + w_right) + z * std::sqrt(0.25 * (t_right - t_left));
}

}  // namespace mlmc
