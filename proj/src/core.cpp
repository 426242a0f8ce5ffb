#include "mlmc/core.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

namespace mlmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Least-squares slope through (x_i, y_i).
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

// Slope of log2|v| over levels >= l_min, NaN when fewer than min_points usable.
double slope_or_nan(std::span<const double> values, int l_min, int first_level, std::size_t min_points) {
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int level = first_level + static_cast<int>(i);
        const double v = std::abs(values[i]);
        if (level < l_min || !(v > 0.0) || !std::isfinite(v)) continue;
        x.push_back(level);
        y.push_back(std::log2(v));
    }
    if (x.size() < min_points) return kNaN;
    return ls_slope(x, y);
}

double kurtosis_or_nan(const LevelMoments& m) {
    try {
        return kurtosis(m);
    } catch (const UndefinedKurtosis&) {
        return kNaN;
    }
}

}  // namespace

double LevelMoments::variance() const {
    if (n == 0) return 0.0;
    const double dn = static_cast<double>(n);
    const double mu = s1 / dn;
    return std::max(0.0, s2 / dn - mu * mu);
}

LevelMoments merge(LevelMoments a, const LevelMoments& b) { return a.merge(b); }

double kurtosis(const LevelMoments& m) {
    if (m.n < 4) throw UndefinedKurtosis("kurtosis: need at least 4 samples");
    const double dn = static_cast<double>(m.n);
    const double mu = m.s1 / dn;
    const double e2 = m.s2 / dn;
    const double e3 = m.s3 / dn;
    const double e4 = m.s4 / dn;
    const double m2 = e2 - mu * mu;
    if (!(m2 > 1e-12 * e2)) throw UndefinedKurtosis("kurtosis: sample variance is zero");
    const double m4 = e4 - 4.0 * mu * e3 + 6.0 * mu * mu * e2 - 3.0 * mu * mu * mu * mu;
    return m4 / (m2 * m2);
}

std::vector<std::int64_t> optimal_allocation(std::span<const double> variances, std::span<const double> costs,
                                             double epsilon, std::int64_t n_min) {
    if (variances.size() != costs.size() || variances.empty()) {
        throw InvalidInput("optimal_allocation: variances and costs must be non-empty and of equal length");
    }
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("optimal_allocation: epsilon must be > 0");
    double sum = 0.0;
    for (std::size_t l = 0; l < costs.size(); ++l) {
        if (!(costs[l] > 0.0)) throw InvalidInput("optimal_allocation: costs must be > 0");
        if (!(variances[l] >= 0.0)) throw InvalidInput("optimal_allocation: variances must be >= 0");
        sum += std::sqrt(variances[l] * costs[l]);
    }
    std::vector<std::int64_t> n(costs.size());
    for (std::size_t l = 0; l < costs.size(); ++l) {
        const double exact = 2.0 * sum * std::sqrt(variances[l] / costs[l]) / (epsilon * epsilon);
        n[l] = std::max(n_min, static_cast<std::int64_t>(std::ceil(exact)));
    }
    return n;
}

double fit_log2_slope(std::span<const double> values, int l_min, int first_level) {
    const double slope = slope_or_nan(values, l_min, first_level, 3);
    if (std::isnan(slope)) throw InsufficientData("fit: fewer than 3 usable levels");
    return slope;
}

Rates fit_rates(std::span<const double> level_means, std::span<const double> level_variances,
                std::span<const double> level_costs, int l_min, int first_level) {
    Rates r;
    for (std::size_t i = 0; i < level_variances.size(); ++i) {
        const int level = first_level + static_cast<int>(i);
        if (level >= l_min && level_variances[i] == 0.0) {
            r.warnings.push_back("level " + std::to_string(level) + " has zero variance; excluded from fit");
        }
    }
    r.alpha = -fit_log2_slope(level_means, l_min, first_level);
    r.beta = -fit_log2_slope(level_variances, l_min, first_level);
    r.gamma = fit_log2_slope(level_costs, l_min, first_level);
    return r;
}

void sample_level(const LevelEstimator& estimator, int level, std::int64_t first, std::int64_t count,
                  const StreamKey& root, std::span<LevelMoments> moments, int threads, std::int64_t batch) {
    const std::size_t d = estimator.outputs();
    if (moments.size() != d) throw InvalidInput("sample_level: moments span must match estimator outputs");
    if (count <= 0) return;
    batch = std::max<std::int64_t>(1, batch);
    threads = std::max(1, threads);

    const StreamKey level_key = derive(root, static_cast<std::uint64_t>(level));
    std::vector<double> values;
    std::vector<double> costs;

    auto run_range = [&](std::int64_t offset, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            GaussianStream stream(derive(level_key, static_cast<std::uint64_t>(offset + i)));
            costs[i] = estimator.sample(level, stream, std::span<double>(values.data() + i * d, d));
        }
    };

    for (std::int64_t done = 0; done < count;) {
        const std::int64_t m = std::min(batch, count - done);
        values.assign(static_cast<std::size_t>(m) * d, 0.0);
        costs.assign(static_cast<std::size_t>(m), 0.0);
        const std::int64_t offset = first + done;

        if (threads == 1 || m < 2 * threads) {
            run_range(offset, 0, m);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(threads);
            const std::int64_t chunk = (m + threads - 1) / threads;
            for (int t = 0; t < threads; ++t) {
                const std::int64_t lo = t * chunk;
                const std::int64_t hi = std::min(m, lo + chunk);
                pool.emplace_back([&, t, lo, hi] {
                    try {
                        run_range(offset, lo, hi);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) th.join();
            for (auto& e : errors) {
                if (e) std::rethrow_exception(e);
            }
        }

        // Fixed accumulation order makes the sums independent of the partition.
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < d; ++j) moments[j].add(values[i * d + j], costs[i]);
        }
        done += m;
    }
}

std::vector<LevelMoments> sample_level(const LevelEstimator& estimator, int level, std::int64_t count,
                                       const StreamKey& root, int threads) {
    std::vector<LevelMoments> m(estimator.outputs());
    sample_level(estimator, level, 0, count, root, m, threads);
    return m;
}

MlmcResult summarize(std::span<const LevelMoments> levels, int l_min_fit, double epsilon) {
    MlmcResult res;
    res.epsilon = epsilon;
    std::vector<double> means;
    std::vector<double> vars;
    std::vector<double> costs;
    double var_of_estimate = 0.0;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const LevelMoments& m = levels[l];
        LevelStats s;
        s.level = static_cast<int>(l);
        s.n = m.n;
        s.mean = m.mean();
        s.variance = m.variance();
        s.cost = m.cost_per_sample();
        s.kurtosis = kurtosis_or_nan(m);
        if (s.kurtosis > 100.0) {
            res.warnings.push_back("level " + std::to_string(l) + " kurtosis " + std::to_string(s.kurtosis) +
                                   " exceeds 100; variance estimate unreliable");
        }
        res.estimate += s.mean;
        res.total_cost += m.cost;
        if (m.n > 0) var_of_estimate += s.variance / static_cast<double>(m.n);
        means.push_back(s.mean);
        vars.push_back(s.variance);
        costs.push_back(s.cost);
        res.levels.push_back(s);
    }
    res.std_error = std::sqrt(var_of_estimate);

    for (int l_min : {l_min_fit, 1, 0}) {
        try {
            res.rates = fit_rates(means, vars, costs, l_min);
            if (l_min != l_min_fit) {
                res.warnings.push_back("rates fitted from level " + std::to_string(l_min) +
                                       " (too few levels above l_min_fit)");
            }
            break;
        } catch (const InsufficientData&) {
            res.rates = Rates{kNaN, kNaN, kNaN, {}};
        }
    }
    if (std::isnan(res.rates.beta)) res.warnings.push_back("rates could not be fitted");
    for (auto& w : res.rates.warnings) res.warnings.push_back(w);
    return res;
}

std::vector<MlmcResult> run_mlmc_multi(const LevelEstimator& estimator, double epsilon, const MlmcConfig& config) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("run_mlmc: epsilon must be > 0");
    if (config.l_start < 1 || config.l_max < config.l_start) throw InvalidInput("run_mlmc: need 1 <= l_start <= l_max");
    if (config.n_warm < 1 || config.n_min < 1) throw InvalidInput("run_mlmc: n_warm and n_min must be >= 1");

    const std::size_t d = estimator.outputs();
    const std::size_t dc = std::min(d, estimator.controlled_outputs());
    const StreamKey root(config.seed);

    int L = config.l_start;
    std::vector<std::vector<LevelMoments>> mom(L + 1, std::vector<LevelMoments>(d));
    std::vector<std::int64_t> n(L + 1, 0);
    std::vector<std::int64_t> dn(L + 1, std::max(config.n_warm, config.n_min));

    auto build_results = [&] {
        std::vector<MlmcResult> out;
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<LevelMoments> per_level;
            for (auto& lv : mom) per_level.push_back(lv[j]);
            out.push_back(summarize(per_level, config.l_min_fit, epsilon));
        }
        return out;
    };

    // Driver-side rate estimate over levels >= 1 with the usual floor of 0.5.
    auto driver_rate = [](double fixed, const std::vector<double>& v, double sign) {
        if (fixed > 0.0) return fixed;
        const double s = slope_or_nan(v, 1, 0, 2);
        return std::isnan(s) ? 0.5 : std::max(0.5, sign * s);
    };

    while (true) {
        for (int l = 0; l <= L; ++l) {
            if (dn[l] > 0) {
                sample_level(estimator, l, n[l], dn[l], root, mom[l], config.threads, config.batch);
                n[l] += dn[l];
            }
        }

        std::vector<double> cost(L + 1);
        for (int l = 0; l <= L; ++l) cost[l] = std::max(mom[l][0].cost_per_sample(), 1e-300);
        const double gamma = driver_rate(config.gamma, cost, 1.0);

        std::vector<std::vector<double>> means(dc, std::vector<double>(L + 1));
        std::vector<std::vector<double>> vars(dc, std::vector<double>(L + 1));
        std::vector<double> alpha(dc);
        std::vector<double> beta(dc);
        for (std::size_t j = 0; j < dc; ++j) {
            for (int l = 0; l <= L; ++l) {
                means[j][l] = mom[l][j].mean();
                vars[j][l] = mom[l][j].variance();
            }
            alpha[j] = driver_rate(config.alpha, means[j], -1.0);
            beta[j] = driver_rate(config.beta, vars[j], -1.0);
            // Guard against spuriously small variance estimates on fine levels.
            for (int l = 2; l <= L; ++l) vars[j][l] = std::max(vars[j][l], 0.5 * vars[j][l - 1] / std::exp2(beta[j]));
        }

        auto allocate = [&] {
            std::vector<std::int64_t> target(L + 1, config.n_min);
            for (std::size_t j = 0; j < dc; ++j) {
                const auto nj = optimal_allocation(vars[j], cost, epsilon, config.n_min);
                for (int l = 0; l <= L; ++l) target[l] = std::max(target[l], nj[l]);
            }
            for (int l = 0; l <= L; ++l) dn[l] = std::max<std::int64_t>(0, target[l] - n[l]);
        };
        allocate();

        bool pending = false;
        for (int l = 0; l <= L; ++l) pending = pending || dn[l] > 0.01 * static_cast<double>(n[l]);
        if (pending) continue;

        bool converged = true;
        for (std::size_t j = 0; j < dc; ++j) {
            const double scale = std::exp2(alpha[j]);
            const double rem = std::max(std::abs(means[j][L]), std::abs(means[j][L - 1]) / scale) / (scale - 1.0);
            if (rem > epsilon / std::sqrt(2.0)) converged = false;
        }
        if (converged) {
            // Take any residual top-up so every level meets its allocation.
            for (int l = 0; l <= L; ++l) {
                if (dn[l] > 0) {
                    sample_level(estimator, l, n[l], dn[l], root, mom[l], config.threads, config.batch);
                    n[l] += dn[l];
                }
            }
            break;
        }
        if (L == config.l_max) {
            throw MaxLevelsExceeded("run_mlmc: bias test still failing at l_max = " + std::to_string(config.l_max),
                                    build_results());
        }

        ++L;
        mom.emplace_back(d);
        n.push_back(0);
        dn.push_back(0);
        cost.push_back(cost[L - 1] * std::exp2(gamma));
        for (std::size_t j = 0; j < dc; ++j) {
            means[j].push_back(0.0);
            vars[j].push_back(vars[j][L - 1] / std::exp2(beta[j]));
        }
        allocate();
    }

    return build_results();
}

MlmcResult run_mlmc(const LevelEstimator& estimator, double epsilon, const MlmcConfig& config) {
    return run_mlmc_multi(estimator, epsilon, config).front();
}

}  // namespace mlmc
