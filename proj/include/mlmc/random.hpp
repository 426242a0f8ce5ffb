#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace mlmc {

/// Identifies one reproducible random stream: a root seed plus a derivation
/// path such as {estimator, level, sample, branch}. Equal keys always yield
/// the same stream; keys differing anywhere in the path yield independent ones.
class StreamKey {
public:
    explicit StreamKey(std::uint64_t seed = 0);
    StreamKey(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<std::uint64_t>& path() const noexcept { return path_; }

    /// 64-bit hash of (seed, path); this is the generator key.
    std::uint64_t digest() const noexcept { return digest_; }

    friend bool operator==(const StreamKey& a, const StreamKey& b) {
        return a.seed_ == b.seed_ && a.path_ == b.path_;
    }

private:
    friend StreamKey derive(const StreamKey& parent, std::uint64_t child_index);

    std::uint64_t seed_;
    std::vector<std::uint64_t> path_;
    std::uint64_t digest_;
};

StreamKey derive(const StreamKey& parent, std::uint64_t child_index);

/// Philox4x32-10 block; returns the first 64 bits of the output block.
std::uint64_t philox_bits(std::uint64_t key, std::uint64_t counter) noexcept;

/// Counter-based standard normal stream. The value of draw number c is a pure
/// function of (key, c); next() returns draw `counter()` and advances by one.
class GaussianStream {
public:
    explicit GaussianStream(StreamKey key, std::uint64_t counter = 0)
        : key_(std::move(key)), digest_(key_.digest()), counter_(counter) {}

    const StreamKey& key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

    /// Uniform on the open interval (0, 1) for draw index c.
    double uniform_at(std::uint64_t c) const noexcept;
    double normal_at(std::uint64_t c) const;

    double next() { return normal_at(counter_++); }

    /// Independent child stream, e.g. for a branch of a splitting tree.
    GaussianStream child(std::uint64_t index) const { return GaussianStream(derive(key_, index)); }

private:
    StreamKey key_;
    std::uint64_t digest_;
    std::uint64_t counter_;
};

inline double next_normal(GaussianStream& stream) { return stream.next(); }

double normal_cdf(double x) noexcept;
double normal_pdf(double x) noexcept;

/// Inverse of normal_cdf on (0, 1).
double normal_quantile(double u);

/// Sample of W at the midpoint of [t_left, t_right] given its endpoint values,
/// driven by the standard normal z. Throws InvalidInterval if t_left >= t_right.
double brownian_bridge_midpoint(double w_left, double w_right, double t_left, double t_right, double z);

}  // namespace mlmc
