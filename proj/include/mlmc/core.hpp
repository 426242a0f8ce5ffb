#pragma once

#include "mlmc/errors.hpp"
#include "mlmc/random.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mlmc {

/// Running power sums of level-correction samples plus accumulated cost.
struct LevelMoments {
    std::int64_t n = 0;
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;
    double s4 = 0.0;
    double cost = 0.0;

    void add(double y, double sample_cost) {
        const double y2 = y * y;
        ++n;
        s1 += y;
        s2 += y2;
        s3 += y2 * y;
        s4 += y2 * y2;
        cost += sample_cost;
    }

    LevelMoments& merge(const LevelMoments& other) {
        n += other.n;
        s1 += other.s1;
        s2 += other.s2;
        s3 += other.s3;
        s4 += other.s4;
        cost += other.cost;
        return *this;
    }

    double mean() const { return n > 0 ? s1 / static_cast<double>(n) : 0.0; }

    /// Biased (1/n) variance, clamped at zero.
    double variance() const;

    double cost_per_sample() const { return n > 0 ? cost / static_cast<double>(n) : 0.0; }
};

LevelMoments merge(LevelMoments a, const LevelMoments& b);

/// Non-excess kurtosis m4 / m2^2. Throws UndefinedKurtosis when n < 4 or the
/// sample variance vanishes.
double kurtosis(const LevelMoments& m);

/// N_l = ceil(2 eps^-2 sqrt(V_l/C_l) sum_k sqrt(V_k C_k)), raised to n_min.
std::vector<std::int64_t> optimal_allocation(std::span<const double> variances, std::span<const double> costs,
                                             double epsilon, std::int64_t n_min = 0);

struct Rates {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    std::vector<std::string> warnings;
};

/// Least-squares slope of log2 y against level for levels >= l_min.
/// Levels with y == 0 are skipped; throws InsufficientData below 3 points.
double fit_log2_slope(std::span<const double> values, int l_min, int first_level = 0);

/// Entry i of each list belongs to level first_level + i. Fits levels >= l_min;
/// alpha and beta are negated slopes, gamma is the cost slope.
Rates fit_rates(std::span<const double> level_means, std::span<const double> level_variances,
                std::span<const double> level_costs, int l_min = 2, int first_level = 0);

/// A family of coupled level-correction samplers. Each call fills `out` with
/// outputs() correction values drawn from `stream` and returns the sample cost.
class LevelEstimator {
public:
    virtual ~LevelEstimator() = default;

    virtual std::size_t outputs() const { return 1; }

    /// Only the first controlled_outputs() entries drive allocation and the
    /// bias test; the rest are tracked for reporting.
    virtual std::size_t controlled_outputs() const { return outputs(); }

    virtual double sample(int level, GaussianStream& stream, std::span<double> out) const = 0;
};

/// Adapts a callable (level, stream) -> {value, cost} into a LevelEstimator.
class FunctionEstimator final : public LevelEstimator {
public:
    struct Draw {
        double value;
        double cost;
    };
    using Fn = std::function<Draw(int, GaussianStream&)>;

    explicit FunctionEstimator(Fn fn) : fn_(std::move(fn)) {}

    double sample(int level, GaussianStream& stream, std::span<double> out) const override {
        const Draw d = fn_(level, stream);
        out[0] = d.value;
        return d.cost;
    }

private:
    Fn fn_;
};

/// Draws samples [first, first + count) of `level`, sample i using the stream
/// derive(derive(root, level), i), and accumulates them into `moments` (one
/// entry per estimator output) in index order. The result does not depend on
/// `threads` or `batch`.
void sample_level(const LevelEstimator& estimator, int level, std::int64_t first, std::int64_t count,
                  const StreamKey& root, std::span<LevelMoments> moments, int threads = 1,
                  std::int64_t batch = 4096);

std::vector<LevelMoments> sample_level(const LevelEstimator& estimator, int level, std::int64_t count,
                                       const StreamKey& root, int threads = 1);

struct MlmcConfig {
    double epsilon = 0.01;
    std::uint64_t seed = 0;
    int l_min_fit = 2;
    int l_start = 2;
    int l_max = 12;
    std::int64_t n_warm = 1000;
    std::int64_t n_min = 32;
    int threads = 1;
    std::int64_t batch = 4096;
    // Fixed rates for the driver; values <= 0 mean "estimate from data".
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

struct LevelStats {
    int level = 0;
    std::int64_t n = 0;
    double mean = 0.0;
    double variance = 0.0;
    double cost = 0.0;      // per sample
    double kurtosis = 0.0;  // NaN when undefined
};

struct MlmcResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::vector<LevelStats> levels;
    Rates rates;
    double epsilon = 0.0;
    double total_cost = 0.0;
    std::vector<std::string> warnings;
};

class MaxLevelsExceeded : public std::runtime_error {
public:
    MaxLevelsExceeded(const std::string& what, std::vector<MlmcResult> partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}

    const MlmcResult& partial() const { return partial_.front(); }
    const std::vector<MlmcResult>& partial_all() const { return partial_; }

private:
    std::vector<MlmcResult> partial_;
};

/// Adaptive MLMC driver for a single-output estimator.
MlmcResult run_mlmc(const LevelEstimator& estimator, double epsilon, const MlmcConfig& config);

/// Same driver for a multi-output estimator: all outputs share one sample
/// allocation (the maximum over controlled outputs) and one level count.
std::vector<MlmcResult> run_mlmc_multi(const LevelEstimator& estimator, double epsilon, const MlmcConfig& config);

/// Summary of per-level moments in the MlmcResult layout (no driver involved).
MlmcResult summarize(std::span<const LevelMoments> levels, int l_min_fit, double epsilon = 0.0);

}  // namespace mlmc
