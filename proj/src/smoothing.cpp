#include "mlmc/smoothing.hpp"

#include "mlmc/errors.hpp"
#include "mlmc/random.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mlmc {

namespace {

using Quadrature = boost::math::quadrature::gauss_kronrod<double, 61>;

template <class F>
double integrate(F f, double a, double b, double abs_tol) {
    double err = 0.0;
    const double value = Quadrature::integrate(f, a, b, 15, 1e-13, &err);
    if (!(err <= abs_tol) || !std::isfinite(value)) {
        throw AccuracyError("quadrature did not converge (error estimate " + std::to_string(err) + ")");
    }
    return value;
}

// Beyond this |x| every Phi(s x) term is within 1e-300 of its limit.
double tail_cutoff(const SmoothingKernel& kernel) {
    double s_min = std::numeric_limits<double>::infinity();
    for (const auto& t : kernel.terms()) s_min = std::min(s_min, t.scale);
    return 40.0 / s_min;
}

// g(x) - 1 for x > 0 without cancellation; needs unit weight sum.
double g_minus_one(const SmoothingKernel& kernel, double x) {
    double v = 0.0;
    for (const auto& t : kernel.terms()) v -= t.weight * normal_cdf(-t.scale * x);
    return v;
}

void require_unit_weights(const SmoothingKernel& kernel, const char* who) {
    if (std::abs(kernel.weight_sum() - 1.0) > 1e-12) {
        throw DivergentMoment(std::string(who) + ": g(x) - H(x) does not vanish as x -> +inf");
    }
}

}  // namespace

SmoothingKernel::SmoothingKernel(std::vector<KernelTerm> terms, bool ramp, double delta)
    : terms_(std::move(terms)), ramp_(ramp), delta_(delta) {
    if (!(delta > 0.0)) throw InvalidInput("SmoothingKernel: delta must be > 0");
    for (const auto& t : terms_) {
        if (!(t.scale > 0.0)) throw InvalidInput("SmoothingKernel: scales must be > 0");
    }
}

SmoothingKernel SmoothingKernel::phi(double delta) { return SmoothingKernel({{1.0, 1.0}}, false, delta); }

SmoothingKernel SmoothingKernel::mixture(std::vector<KernelTerm> terms, double delta) {
    if (terms.empty()) throw InvalidInput("SmoothingKernel: mixture needs at least one term");
    return SmoothingKernel(std::move(terms), false, delta);
}

SmoothingKernel SmoothingKernel::ramp(double delta) { return SmoothingKernel({}, true, delta); }

SmoothingKernel SmoothingKernel::phi_a2zero(double delta) {
    const double scales[] = {1.0, 2.0};
    const auto w = solve_a2_cancellation(scales);
    return mixture({{w[0], 1.0}, {w[1], 2.0}}, delta);
}

SmoothingKernel SmoothingKernel::named(std::string_view name, double delta) {
    if (name == "ramp") return ramp(delta);
    if (name == "phi") return phi(delta);
    if (name == "phi_a2zero") return phi_a2zero(delta);
    throw InvalidInput("unknown kernel '" + std::string(name) + "'");
}

double SmoothingKernel::g(double x) const {
    if (ramp_) return std::clamp(x, 0.0, 1.0);
    double v = 0.0;
    for (const auto& t : terms_) v += t.weight * normal_cdf(t.scale * x);
    return v;
}

double SmoothingKernel::weight_sum() const {
    if (ramp_) return 1.0;
    double s = 0.0;
    for (const auto& t : terms_) s += t.weight;
    return s;
}

SmoothingKernel SmoothingKernel::with_delta(double delta) const { return SmoothingKernel(terms_, ramp_, delta); }

double eval_hdelta(const SmoothingKernel& kernel, double x) { return kernel.g(x / kernel.delta()); }

double moment_coefficient(const SmoothingKernel& kernel, int k) {
    if (k < 1) throw InvalidInput("moment_coefficient: k must be >= 1");
    require_unit_weights(kernel, "moment_coefficient");
    const double p = k - 1;
    if (kernel.is_ramp()) {
        return integrate([&](double x) { return std::pow(x, p) * (x - 1.0); }, 0.0, 1.0, 1e-10);
    }
    const double cut = tail_cutoff(kernel);
    const double left = integrate([&](double x) { return std::pow(x, p) * kernel.g(x); }, -cut, 0.0, 1e-10);
    const double right = integrate([&](double x) { return std::pow(x, p) * g_minus_one(kernel, x); }, 0.0, cut, 1e-10);
    return left + right;
}

std::vector<double> solve_a2_cancellation(std::span<const double> scales) {
    if (scales.size() < 2) throw NoSolution("solve_a2_cancellation: need at least two scales");
    std::vector<double> a2;
    for (double s : scales) a2.push_back(moment_coefficient(SmoothingKernel::mixture({{1.0, s}}, 1.0), 2));

    // Minimum-norm solution of [1 ... 1; a2] c = [1; 0].
    const double n = static_cast<double>(a2.size());
    double sa = 0.0;
    double saa = 0.0;
    for (double a : a2) {
        sa += a;
        saa += a * a;
    }
    const double det = n * saa - sa * sa;
    if (!(det > 1e-12 * n * saa)) throw NoSolution("solve_a2_cancellation: scales must not all coincide");
    const double y0 = saa / det;
    const double y1 = -sa / det;
    std::vector<double> c;
    for (double a : a2) c.push_back(y0 + y1 * a);
    return c;
}

double bias_oracle(const SmoothingKernel& kernel, const std::function<double(double)>& density, double strike) {
    const double d = kernel.delta();
    auto rho = [&](double x) { return density(strike + x * d); };
    if (kernel.is_ramp()) {
        return d * integrate([&](double x) { return (x - 1.0) * rho(x); }, 0.0, 1.0, 1e-10);
    }
    require_unit_weights(kernel, "bias_oracle");
    const double cut = tail_cutoff(kernel);
    const double left = integrate([&](double x) { return kernel.g(x) * rho(x); }, -cut, 0.0, 1e-10);
    const double right = integrate([&](double x) { return g_minus_one(kernel, x) * rho(x); }, 0.0, cut, 1e-10);
    return d * (left + right);
}

double bias_expansion(const SmoothingKernel& kernel, std::span<const double> density_derivatives) {
    // Taylor term j of rho(K + x delta) carries delta^j / j!.
    double sum = 0.0;
    double dk = 1.0;
    double factorial = 1.0;
    for (std::size_t j = 0; j < density_derivatives.size(); ++j) {
        dk *= kernel.delta();
        if (j > 0) factorial *= static_cast<double>(j);
        sum += moment_coefficient(kernel, static_cast<int>(j) + 1) * density_derivatives[j] * dk / factorial;
    }
    return sum;
}

double delta_for_epsilon(std::string_view kernel_name, double epsilon, double scale) {
    if (!(epsilon > 0.0)) throw InvalidInput("delta_for_epsilon: epsilon must be > 0");
    if (kernel_name == "phi_a2zero") return scale * std::pow(epsilon, 0.25);
    if (kernel_name == "phi") return scale * std::sqrt(epsilon);
    if (kernel_name == "ramp") return scale * epsilon;
    throw InvalidInput("unknown kernel '" + std::string(kernel_name) + "'");
}

}  // namespace mlmc
