#pragma once

#include "mlmc/core.hpp"
#include "mlmc/sde.hpp"
#include "mlmc/smoothing.hpp"

#include <span>
#include <string>
#include <vector>

namespace mlmc {

/// Spline points with estimated values and their standard errors.
struct SplineGrid {
    std::vector<double> points;
    std::vector<double> values;
    std::vector<double> std_errors;
};

/// C^2 natural cubic spline through (x_i, y_i). Requires at least 4 strictly
/// increasing abscissae.
class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<double> y);
    explicit CubicSpline(const SplineGrid& grid) : CubicSpline(grid.points, grid.values) {}

    double operator()(double x) const;
    double derivative(double x) const;
    double second_derivative(double x) const;

    const std::vector<double>& knots() const noexcept { return x_; }
    const std::vector<double>& values() const noexcept { return y_; }

private:
    std::size_t segment(double x) const;

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;  // second derivatives at the knots
};

/// n equispaced points on [lo, hi].
std::vector<double> equispaced_points(double lo, double hi, int n);

struct CdfOptions {
    Scheme scheme = Scheme::milstein;
    int n0_steps = 1;
    MlmcConfig mlmc;
};

struct CdfEstimate {
    std::string method;
    SplineGrid grid;           // CDF estimates at the points
    CubicSpline spline;        // spline through the MLMC point estimates
    std::vector<MlmcResult> runs;
    std::vector<std::string> warnings;

    /// CDF estimate at x: the spline itself (smoothed) or its derivative (parity).
    double cdf(double x) const { return method == "parity" ? spline.derivative(x) : spline(x); }
};

/// MLMC estimates of E[H_delta(x_j - S_T)] at every point from shared paths,
/// interpolated by a cubic spline. Decreasing stretches of the spline are
/// reported as warnings.
CdfEstimate estimate_cdf_smoothed(const SdeModel& model, std::span<const double> points,
                                  const SmoothingKernel& kernel, double epsilon, const CdfOptions& options = {});

/// MLMC estimates of E[max(0, x_j - S_T)], splined and differentiated. The
/// reported standard errors are those of the spline derivative at the points.
CdfEstimate estimate_cdf_parity(const SdeModel& model, std::span<const double> points, double epsilon,
                                const CdfOptions& options = {});

}  // namespace mlmc
