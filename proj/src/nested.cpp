#include "mlmc/nested.hpp"

#include "mlmc/errors.hpp"

#include <cmath>
#include <vector>

namespace mlmc {

namespace {

void check(const NestedProblem& p, int level) {
    if (level < 0) throw InvalidInput("nested: level must be >= 0");
    if (p.m0 < 1) throw InvalidInput("nested: m0 must be >= 1");
    if (!p.outer_sampler || !p.inner_sampler) throw InvalidInput("nested: samplers are required");
}

double inner_mean(const NestedProblem& p, double x, std::int64_t m, GaussianStream& stream) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < m; ++i) sum += p.inner_sampler(x, stream);
    return sum / static_cast<double>(m);
}

// Inner draws for one outer sample, drawn on demand and shared by both sides.
class InnerPool {
public:
    InnerPool(const NestedProblem& p, double x, GaussianStream& stream) : p_(p), x_(x), stream_(stream) {}

    void ensure(std::int64_t m) {
        while (static_cast<std::int64_t>(sum_.size()) < m) {
            const double z = p_.inner_sampler(x_, stream_);
            const double s = sum_.empty() ? 0.0 : sum_.back();
            const double q = sq_.empty() ? 0.0 : sq_.back();
            sum_.push_back(s + z);
            sq_.push_back(q + z * z);
        }
    }

    double mean(std::int64_t m) const { return sum_[m - 1] / static_cast<double>(m); }

    /// Unbiased variance of the first m draws (0 for m == 1).
    double variance(std::int64_t m) const {
        if (m < 2) return 0.0;
        const double mu = mean(m);
        const double v = (sq_[m - 1] - static_cast<double>(m) * mu * mu) / static_cast<double>(m - 1);
        return std::max(v, 0.0);
    }

    std::int64_t size() const { return static_cast<std::int64_t>(sum_.size()); }

private:
    const NestedProblem& p_;
    double x_;
    GaussianStream& stream_;
    std::vector<double> sum_;
    std::vector<double> sq_;
};

std::int64_t adapt(InnerPool& pool, double threshold, std::int64_t m_lo, std::int64_t m_hi, double c_adapt) {
    std::int64_t m = m_lo;
    while (true) {
        pool.ensure(m);
        const double gap = std::abs(pool.mean(m) - threshold);
        if (m >= m_hi || gap > c_adapt * std::sqrt(pool.variance(m) / static_cast<double>(m))) return m;
        m *= 2;
    }
}

}  // namespace

NestedProblem gaussian_nested(double k_threshold, std::int64_t m0) {
    NestedProblem p;
    p.outer_sampler = [](GaussianStream& s) { return s.next(); };
    p.inner_sampler = [](double x, GaussianStream& s) { return x + s.next(); };
    p.threshold = k_threshold;
    p.m0 = m0;
    return p;
}

Correction y_nested_plain(const NestedProblem& problem, int level, GaussianStream& stream) {
    check(problem, level);
    const double x = problem.outer_sampler(stream);
    const std::int64_t m_fine = problem.m0 << level;
    Correction c;
    c.fine = problem.apply(inner_mean(problem, x, m_fine, stream));
    c.cost = static_cast<double>(m_fine);
    if (level > 0) {
        const std::int64_t m_coarse = m_fine / 2;
        c.coarse = problem.apply(inner_mean(problem, x, m_coarse, stream));
        c.cost += static_cast<double>(m_coarse);
    }
    return c;
}

Correction y_nested_adaptive(const NestedProblem& problem, int level, GaussianStream& stream, double c_adapt,
                             NestedTrace* trace) {
    check(problem, level);
    const double x = problem.outer_sampler(stream);
    InnerPool pool(problem, x, stream);

    const std::int64_t m0 = problem.m0;
    const std::int64_t fine_m = adapt(pool, problem.threshold, m0 << level, m0 << (2 * level), c_adapt);
    Correction c;
    c.fine = problem.apply(pool.mean(fine_m));
    std::int64_t coarse_m = 0;
    if (level > 0) {
        coarse_m = adapt(pool, problem.threshold, m0 << (level - 1), m0 << (2 * level - 2), c_adapt);
        c.coarse = problem.apply(pool.mean(coarse_m));
    }
    c.cost = static_cast<double>(pool.size());
    if (trace) *trace = {fine_m, coarse_m};
    return c;
}

NestedLevelEstimator::NestedLevelEstimator(NestedProblem problem, bool adaptive, double c_adapt)
    : problem_(std::move(problem)), adaptive_(adaptive), c_adapt_(c_adapt) {}

Correction NestedLevelEstimator::correction(int level, GaussianStream& stream) const {
    return adaptive_ ? y_nested_adaptive(problem_, level, stream, c_adapt_) : y_nested_plain(problem_, level, stream);
}

double NestedLevelEstimator::sample(int level, GaussianStream& stream, std::span<double> out) const {
    const Correction c = correction(level, stream);
    out[0] = c.value();
    return c.cost;
}

}  // namespace mlmc
