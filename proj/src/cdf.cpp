#include "mlmc/cdf.hpp"

#include "mlmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mlmc {

namespace {

void check_grid(const std::vector<double>& x) {
    if (x.size() < 4) throw InsufficientPoints("cubic spline needs at least 4 points");
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) throw InvalidGrid("spline points must be strictly increasing");
    }
}

// Outputs H_delta(x_j - S) or max(0, x_j - S) on coupled paths; for parity the
// tracked outputs are the spline derivative of the controlled ones.
class GridEstimator final : public LevelEstimator {
public:
    GridEstimator(const SdeModel& model, std::vector<double> points, const SmoothingKernel* kernel,
                  const CdfOptions& options)
        : model_(model), points_(std::move(points)), kernel_(kernel), options_(options) {
        if (!kernel_) {
            const std::size_t n = points_.size();
            deriv_.assign(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> unit(n, 0.0);
                unit[i] = 1.0;
                const CubicSpline s(points_, unit);
                for (std::size_t k = 0; k < n; ++k) deriv_[k * n + i] = s.derivative(points_[k]);
            }
        }
    }

    std::size_t outputs() const override { return kernel_ ? points_.size() : 2 * points_.size(); }
    std::size_t controlled_outputs() const override { return points_.size(); }

    double sample(int level, GaussianStream& stream, std::span<double> out) const override {
        const auto st = simulate_coupled(model_, level, options_.n0_steps, options_.scheme, stream);
        const std::size_t n = points_.size();
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = value(points_[j] - st.fine_terminal);
            if (st.has_coarse) out[j] -= value(points_[j] - st.coarse_terminal);
        }
        if (!kernel_) {
            for (std::size_t k = 0; k < n; ++k) {
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i) d += deriv_[k * n + i] * out[i];
                out[n + k] = d;
            }
        }
        return static_cast<double>(st.cost);
    }

private:
    double value(double x) const { return kernel_ ? eval_hdelta(*kernel_, x) : std::max(x, 0.0); }

    const SdeModel& model_;
    std::vector<double> points_;
    const SmoothingKernel* kernel_;
    const CdfOptions& options_;
    std::vector<double> deriv_;
};

void report_monotonicity(CdfEstimate& est) {
    const auto& x = est.grid.points;
    constexpr int kPerInterval = 16;
    double prev = est.cdf(x.front());
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        for (int k = 1; k <= kPerInterval; ++k) {
            const double t = x[i] + (x[i + 1] - x[i]) * k / kPerInterval;
            const double v = est.cdf(t);
            if (v < prev - 1e-12) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "CDF estimate decreases on [%.6g, %.6g] (%.6g -> %.6g)", x[i],
                              x[i + 1], prev, v);
                est.warnings.emplace_back(buf);
                break;
            }
            prev = v;
        }
        prev = est.cdf(x[i + 1]);
    }
}

}  // namespace

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    check_grid(x_);
    if (y_.size() != x_.size()) throw InvalidGrid("spline values must match the points");
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);

    // Tridiagonal system for interior second derivatives, natural ends.
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
        const double lower = x_[i + 1] - x_[i];
        const double w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = k; i-- > 0;) {
        double v = rhs[i];
        if (i + 1 < k) v -= upper[i] * m_[i + 2];
        m_[i + 1] = v / diag[i];
    }
}

std::size_t CubicSpline::segment(double x) const {
    const double span = x_.back() - x_.front();
    if (x < x_.front() - 1e-12 * span || x > x_.back() + 1e-12 * span) {
        throw InvalidInput("spline evaluated outside its range");
    }
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - x_.begin(), 1)) - 1;
    return std::min(i, x_.size() - 2);
}

double CubicSpline::operator()(double x) const {
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double x) const {
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

double CubicSpline::second_derivative(double x) const {
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    return ((x_[i + 1] - x) * m_[i] + (x - x_[i]) * m_[i + 1]) / h;
}

std::vector<double> equispaced_points(double lo, double hi, int n) {
    if (n < 2 || !(hi > lo)) throw InvalidGrid("need n >= 2 and lo < hi");
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * i / (n - 1);
    return x;
}

CdfEstimate estimate_cdf_smoothed(const SdeModel& model, std::span<const double> points,
                                  const SmoothingKernel& kernel, double epsilon, const CdfOptions& options) {
    std::vector<double> x(points.begin(), points.end());
    check_grid(x);
    const GridEstimator est(model, x, &kernel, options);
    auto runs = run_mlmc_multi(est, epsilon, options.mlmc);

    SplineGrid grid{x, {}, {}};
    for (const auto& r : runs) {
        grid.values.push_back(r.estimate);
        grid.std_errors.push_back(r.std_error);
    }
    CdfEstimate out{"smooth", grid, CubicSpline(grid), std::move(runs), {}};
    report_monotonicity(out);
    return out;
}

CdfEstimate estimate_cdf_parity(const SdeModel& model, std::span<const double> points, double epsilon,
                                const CdfOptions& options) {
    std::vector<double> x(points.begin(), points.end());
    check_grid(x);
    const GridEstimator est(model, x, nullptr, options);
    auto runs = run_mlmc_multi(est, epsilon, options.mlmc);

    const std::size_t n = x.size();
    std::vector<double> puts;
    for (std::size_t j = 0; j < n; ++j) puts.push_back(runs[j].estimate);
    CubicSpline spline(x, puts);

    SplineGrid grid{x, {}, {}};
    for (std::size_t j = 0; j < n; ++j) {
        grid.values.push_back(spline.derivative(x[j]));
        grid.std_errors.push_back(runs[n + j].std_error);
    }
    CdfEstimate out{"parity", grid, std::move(spline), std::move(runs), {}};
    report_monotonicity(out);
    return out;
}

}  // namespace mlmc
