#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace mlmc {

/// One term c * Phi(s x) of a Gaussian-CDF mixture.
struct KernelTerm {
    double weight;
    double scale;
};

/// Smoothed step H_delta(x) = g(x / delta). g is either a mixture of scaled
/// normal CDFs or the one-sided ramp clamp(x, 0, 1).
class SmoothingKernel {
public:
    static SmoothingKernel phi(double delta);
    static SmoothingKernel mixture(std::vector<KernelTerm> terms, double delta);
    static SmoothingKernel ramp(double delta);
    /// -1/3 Phi(x) + 4/3 Phi(2x): the mixture on scales {1, 2} with a2 = 0.
    static SmoothingKernel phi_a2zero(double delta);
    /// "ramp", "phi" or "phi_a2zero".
    static SmoothingKernel named(std::string_view name, double delta);

    double g(double x) const;
    double delta() const noexcept { return delta_; }
    bool is_ramp() const noexcept { return ramp_; }
    const std::vector<KernelTerm>& terms() const noexcept { return terms_; }
    double weight_sum() const;

    SmoothingKernel with_delta(double delta) const;

private:
    SmoothingKernel(std::vector<KernelTerm> terms, bool ramp, double delta);

    std::vector<KernelTerm> terms_;
    bool ramp_ = false;
    double delta_ = 1.0;
};

/// g(x / delta).
double eval_hdelta(const SmoothingKernel& kernel, double x);

/// a_k = integral of x^(k-1) (g(x) - H(x)) over the real line, by adaptive
/// Gauss-Kronrod quadrature. Throws DivergentMoment if g does not tend to 1.
double moment_coefficient(const SmoothingKernel& kernel, int k);

/// Weights c_i for g = sum c_i Phi(s_i x) with sum c_i = 1 and a2 = 0
/// (minimum-norm solution for more than two scales). Throws NoSolution when the
/// scales do not determine a solution.
std::vector<double> solve_a2_cancellation(std::span<const double> scales);

/// Exact smoothing bias: integral of (H_delta(s - K) - H(s - K)) rho(s) ds.
double bias_oracle(const SmoothingKernel& kernel, const std::function<double(double)>& density, double strike);

/// Truncated expansion sum_k a_k rho^(k-1)(K) delta^k / (k-1)!, with
/// density_derivatives[j] = rho^(j)(K).
double bias_expansion(const SmoothingKernel& kernel, std::span<const double> density_derivatives);

/// delta for a target RMS error: scale * eps^(1/4) for phi_a2zero,
/// scale * eps^(1/2) for phi, scale * eps for the ramp.
double delta_for_epsilon(std::string_view kernel_name, double epsilon, double scale = 1.0);

}  // namespace mlmc
