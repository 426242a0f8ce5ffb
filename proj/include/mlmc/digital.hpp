#pragma once

#include "mlmc/core.hpp"
#include "mlmc/sde.hpp"
#include "mlmc/smoothing.hpp"

#include <functional>
#include <optional>
#include <string_view>

namespace mlmc {

/// H(x) = 1 for x >= 0, else 0.
inline double heaviside(double x) { return x >= 0.0 ? 1.0 : 0.0; }

enum class PayoffKind { digital_call, call, put, custom };

struct Payoff {
    PayoffKind kind = PayoffKind::digital_call;
    double strike = 1.0;
    std::function<double(double)> custom;

    static Payoff digital_call(double strike) { return {PayoffKind::digital_call, strike, {}}; }
    static Payoff call(double strike) { return {PayoffKind::call, strike, {}}; }
    static Payoff put(double strike) { return {PayoffKind::put, strike, {}}; }

    double operator()(double s) const;
};

PayoffKind parse_payoff_kind(std::string_view name);

/// Fine and coarse parts of one level-correction sample. For level 0 the
/// coarse part is zero.
struct Correction {
    double fine = 0.0;
    double coarse = 0.0;
    double cost = 0.0;

    double value() const { return fine - coarse; }
};

/// Gaussian law of S_T given the data preceding the final Euler step.
struct ConditionalLaw {
    double mean;
    double sd;
};

/// N(S_{T-h} + a h, b^2 h) for the fine path.
ConditionalLaw fine_conditional_law(const CoupledPathState& state, const SdeModel& model);

/// Coarse law given S^c_{T-2h} and the second to last fine increment: mean
/// S + 2 a h + b dW_{N-1}, standard deviation b sqrt(h).
ConditionalLaw coarse_conditional_law(const CoupledPathState& state, const SdeModel& model);

struct CommonMeasure {
    double mu;
    double sigma;
};

/// Midpoint of the two means, larger of the two standard deviations.
CommonMeasure midpoint_measure(const ConditionalLaw& fine, const ConditionalLaw& coarse);

using MeasureRule = std::function<CommonMeasure(const ConditionalLaw&, const ConditionalLaw&)>;

/// Density ratio of `law` to the common measure at x.
double radon_nikodym(const ConditionalLaw& law, const CommonMeasure& measure, double x);

Correction y_standard(const CoupledPathState& state, const Payoff& payoff);

/// Analytic expectation of the digital payoff over the final fine increment.
Correction y_conditional_expectation(const CoupledPathState& state, const SdeModel& model, const Payoff& payoff);

/// Draws S_T from the common measure and reweights it for each path; returns
/// (f(S_T) - f(mu)) R plus f(mu) for each side.
Correction y_change_of_measure(const CoupledPathState& state, const SdeModel& model, const Payoff& payoff,
                               GaussianStream& stream, const MeasureRule& rule = midpoint_measure);

Correction y_smoothed(const CoupledPathState& state, const Payoff& payoff, const SmoothingKernel& kernel);

/// Common path to T - h_coarse, one shared dW_{N-1}, then m_splits final
/// increments each shared by the fine and coarse continuation.
Correction y_split_final(const SdeModel& model, const Payoff& payoff, int level, int n0_steps, Scheme scheme,
                         int m_splits, GaussianStream& stream, std::optional<Scheme> final_scheme = std::nullopt);

/// Binary branching at t_k = T (1 - 2^-k), k = 1..level-1, averaged over the
/// 2^(level-1) leaves.
Correction y_branching_split(const SdeModel& model, const Payoff& payoff, int level, int n0_steps, Scheme scheme,
                             GaussianStream& stream);

struct BranchTree {
    std::vector<double> split_times;
    std::int64_t leaves = 0;
    std::int64_t fine_steps = 0;
};

/// Tree layout used by y_branching_split at `level`.
BranchTree branching_layout(int level, int n0_steps, double maturity);

struct AdaptiveTrace {
    double fine_h = 0.0;
    double coarse_h = 0.0;
};

/// Timestep adapted per path between h_l and its square, refining by Brownian
/// bridge while |S_T - K| <= c_adapt sqrt(h).
Correction y_adaptive_timestep(const SdeModel& model, const Payoff& payoff, int level, int n0_steps, Scheme scheme,
                               GaussianStream& stream, double c_adapt, AdaptiveTrace* trace = nullptr);

enum class EstimatorKind { standard, smoothed, cond_exp, com, split, branch, adaptive_h };

EstimatorKind parse_estimator_kind(std::string_view name);
std::string_view to_string(EstimatorKind kind);

enum class SplitRule { sqrt, linear };

SplitRule parse_split_rule(std::string_view name);

/// ceil(h^-1/2) or ceil(h^-1) splits.
int splits_for(SplitRule rule, double h_fine);

struct PathEstimatorOptions {
    EstimatorKind kind = EstimatorKind::standard;
    Scheme scheme = Scheme::euler;
    int n0_steps = 1;
    SplitRule split_rule = SplitRule::sqrt;
    std::optional<Scheme> split_final_scheme;
    std::optional<SmoothingKernel> kernel;
    double c_adapt = 3.0;
};

/// LevelEstimator over coupled SDE paths for a single payoff.
class PathLevelEstimator final : public LevelEstimator {
public:
    PathLevelEstimator(SdeModel model, Payoff payoff, PathEstimatorOptions options);

    double sample(int level, GaussianStream& stream, std::span<double> out) const override;

    Correction correction(int level, GaussianStream& stream) const;

    const PathEstimatorOptions& options() const { return options_; }

private:
    SdeModel model_;
    Payoff payoff_;
    PathEstimatorOptions options_;
};

}  // namespace mlmc
