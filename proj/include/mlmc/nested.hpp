#pragma once

#include "mlmc/core.hpp"
#include "mlmc/digital.hpp"

#include <functional>

namespace mlmc {

/// E[f(E[Z | X])] with X from outer_sampler and Z | X from inner_sampler.
struct NestedProblem {
    std::function<double(GaussianStream&)> outer_sampler;
    std::function<double(double, GaussianStream&)> inner_sampler;
    /// Outer function; when empty, H(z - threshold).
    std::function<double(double)> f;
    double threshold = 0.0;
    std::int64_t m0 = 1;

    double apply(double z) const { return f ? f(z) : heaviside(z - threshold); }
};

/// X ~ N(0, 1), Z | X ~ N(X, 1), f = H(z - k).
NestedProblem gaussian_nested(double k_threshold, std::int64_t m0);

/// f of the mean of 2^l m0 inner draws minus f of an independent mean of
/// 2^(l-1) m0 draws, both given the same X.
Correction y_nested_plain(const NestedProblem& problem, int level, GaussianStream& stream);

struct NestedTrace {
    std::int64_t fine_m = 0;
    std::int64_t coarse_m = 0;
};

/// Inner count doubles from 2^l m0 towards 4^l m0 while
/// |Zbar - K| <= c_adapt sqrt(var / M). The coarse side runs the same rule on
/// level l-1 targets over a prefix of the fine side's inner draws.
Correction y_nested_adaptive(const NestedProblem& problem, int level, GaussianStream& stream, double c_adapt,
                             NestedTrace* trace = nullptr);

class NestedLevelEstimator final : public LevelEstimator {
public:
    NestedLevelEstimator(NestedProblem problem, bool adaptive, double c_adapt = 3.0);

    double sample(int level, GaussianStream& stream, std::span<double> out) const override;

    Correction correction(int level, GaussianStream& stream) const;

private:
    NestedProblem problem_;
    bool adaptive_;
    double c_adapt_;
};

}  // namespace mlmc
