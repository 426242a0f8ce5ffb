#include "mlmc/harness.hpp"

#include "mlmc/errors.hpp"
#include "mlmc/random.hpp"
#include "mlmc/smoothing.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace mlmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

double to_double(const std::string& s, int line, const std::string& key) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw ConfigError("'" + key + "': expected a number, got '" + s + "'", line);
    }
    return v;
}

std::int64_t to_int(const std::string& s, int line, const std::string& key) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw ConfigError("'" + key + "': expected an integer, got '" + s + "'", line);
    }
    return v;
}

std::uint64_t to_u64(const std::string& s, int line, const std::string& key) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s[0] == '-' || end != s.c_str() + s.size() || errno == ERANGE) {
        throw ConfigError("'" + key + "': expected a non-negative integer, got '" + s + "'", line);
    }
    return v;
}

bool to_bool(const std::string& s, int line, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("'" + key + "': expected true or false, got '" + s + "'", line);
}

std::pair<double, double> to_range(const std::string& s, int line, const std::string& key) {
    const auto parts = split(s, ':');
    if (parts.size() != 2) throw ConfigError("'" + key + "': expected lo:hi, got '" + s + "'", line);
    return {to_double(parts[0], line, key), to_double(parts[1], line, key)};
}

Expectation to_expectation(const std::string& s, int line, const std::string& key) {
    const auto pos = s.find("+-");
    if (pos == std::string::npos) throw ConfigError("'" + key + "': expected 'value +- tolerance'", line);
    Expectation e{to_double(trim(s.substr(0, pos)), line, key), to_double(trim(s.substr(pos + 2)), line, key)};
    if (!(e.tolerance >= 0.0)) throw ConfigError("'" + key + "': tolerance must be >= 0", line);
    return e;
}

template <class F>
auto rethrow_with_line(int line, F f) {
    try {
        return f();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what(), line);
    }
}

std::string fmtg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Check make_check(const std::string& name, double value, double lo, double hi) {
    return {name, value, lo, hi, value >= lo && value <= hi};
}

Check expectation_check(const std::string& name, double value, const Expectation& e) {
    return make_check(name, value, e.center - e.tolerance, e.center + e.tolerance);
}

bool all_pass(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

double smoothing_delta(const ExperimentSpec& spec, double epsilon) {
    if (spec.delta_rule == "eps_quarter") return delta_for_epsilon(spec.kernel, epsilon, spec.delta_scale);
    return spec.delta;
}

bool is_nested(const ExperimentSpec& spec) {
    return spec.estimator == "nested_plain" || spec.estimator == "nested_adaptive";
}

}  // namespace

std::vector<ConfigSection> parse_config(const std::string& text) {
    std::vector<ConfigSection> sections;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto cut = raw.find_first_of("#;");
        const std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("unterminated section header", line);
            const std::string name = trim(s.substr(1, s.size() - 2));
            if (name.empty()) throw ConfigError("empty section name", line);
            for (const auto& sec : sections) {
                if (sec.name == name) throw ConfigError("duplicate section '" + name + "'", line);
            }
            sections.push_back({name, line, {}});
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
        if (sections.empty()) throw ConfigError("entry before the first [section]", line);
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw ConfigError("empty key", line);
        auto& entries = sections.back().entries;
        if (entries.count(key)) throw ConfigError("duplicate key '" + key + "'", line);
        entries[key] = {trim(s.substr(eq + 1)), line};
    }
    return sections;
}

ExperimentSpec spec_from_section(const ConfigSection& section) {
    ExperimentSpec spec;
    spec.name = section.name;
    using Setter = std::function<void(const std::string&, int, const std::string&)>;
    auto dbl = [](double& f) -> Setter {
        return [&f](const std::string& v, int l, const std::string& k) { f = to_double(v, l, k); };
    };
    auto str = [](std::string& f) -> Setter { return [&f](const std::string& v, int, const std::string&) { f = v; }; };

    const std::map<std::string, Setter> setters = {
        {"estimator", str(spec.estimator)},
        {"payoff", str(spec.payoff)},
        {"scheme",
         [&](const std::string& v, int l, const std::string&) {
             spec.scheme = rethrow_with_line(l, [&] { return parse_scheme(v); });
         }},
        {"model", str(spec.model)},
        {"r", dbl(spec.r)},
        {"sigma", dbl(spec.sigma)},
        {"s0", dbl(spec.s0)},
        {"maturity", dbl(spec.maturity)},
        {"strike", dbl(spec.strike)},
        {"n0_steps", [&](const std::string& v, int l, const std::string& k) { spec.n0_steps = to_int(v, l, k); }},
        {"levels",
         [&](const std::string& v, int l, const std::string& k) {
             const auto [lo, hi] = to_range(v, l, k);
             spec.l_first = static_cast<int>(lo);
             spec.l_last = static_cast<int>(hi);
             if (spec.l_first != lo || spec.l_last != hi || spec.l_first < 0 || spec.l_last < spec.l_first) {
                 throw ConfigError("'levels': expected a non-empty integer range lo:hi", l);
             }
         }},
        {"l_min_fit", [&](const std::string& v, int l, const std::string& k) { spec.l_min_fit = to_int(v, l, k); }},
        {"n_conv", [&](const std::string& v, int l, const std::string& k) { spec.n_conv = to_int(v, l, k); }},
        {"epsilons",
         [&](const std::string& v, int l, const std::string& k) {
             spec.epsilons.clear();
             for (const auto& e : split(v, ',')) spec.epsilons.push_back(to_double(e, l, k));
             for (double e : spec.epsilons) {
                 if (!(e > 0.0)) throw ConfigError("'epsilons': values must be > 0", l);
             }
         }},
        {"replications",
         [&](const std::string& v, int l, const std::string& k) {
             spec.replications = static_cast<int>(to_int(v, l, k));
             if (spec.replications < 1) throw ConfigError("'replications' must be >= 1", l);
         }},
        {"epsilon",
         [&](const std::string& v, int l, const std::string& k) {
             const double e = to_double(v, l, k);
             if (!(e > 0.0)) throw ConfigError("'epsilon' must be > 0", l);
             spec.epsilons = {e};
         }},
        {"seed", [&](const std::string& v, int l, const std::string& k) { spec.seed = to_u64(v, l, k); }},
        {"out_dir", str(spec.out_dir)},
        {"threads", [&](const std::string& v, int l, const std::string& k) { spec.threads = to_int(v, l, k); }},
        {"l_start", [&](const std::string& v, int l, const std::string& k) { spec.l_start = to_int(v, l, k); }},
        {"l_max", [&](const std::string& v, int l, const std::string& k) { spec.l_max = to_int(v, l, k); }},
        {"n_warm", [&](const std::string& v, int l, const std::string& k) { spec.n_warm = to_int(v, l, k); }},
        {"n_min", [&](const std::string& v, int l, const std::string& k) { spec.n_min = to_int(v, l, k); }},
        {"alpha", dbl(spec.alpha)},
        {"beta", dbl(spec.beta)},
        {"gamma", dbl(spec.gamma)},
        {"kernel", str(spec.kernel)},
        {"delta", dbl(spec.delta)},
        {"delta_rule", str(spec.delta_rule)},
        {"delta_scale", dbl(spec.delta_scale)},
        {"m_splits_rule",
         [&](const std::string& v, int l, const std::string&) {
             spec.m_splits_rule = rethrow_with_line(l, [&] { return parse_split_rule(v); });
         }},
        {"split_final_scheme",
         [&](const std::string& v, int l, const std::string&) {
             spec.split_final_scheme = rethrow_with_line(l, [&] { return parse_scheme(v); });
         }},
        {"c_adapt", dbl(spec.c_adapt)},
        {"k_threshold", dbl(spec.k_threshold)},
        {"m0", [&](const std::string& v, int l, const std::string& k) { spec.m0 = to_int(v, l, k); }},
        {"cdf_method", str(spec.cdf_method)},
        {"cdf_points", [&](const std::string& v, int l, const std::string& k) { spec.cdf_points = to_int(v, l, k); }},
        {"cdf_range",
         [&](const std::string& v, int l, const std::string& k) {
             std::tie(spec.cdf_lo, spec.cdf_hi) = to_range(v, l, k);
         }},
        {"cdf_epsilon", dbl(spec.cdf_epsilon)},
        {"cdf_tolerance",
         [&](const std::string& v, int l, const std::string& k) { spec.cdf_tolerance = to_double(v, l, k); }},
        {"cdf_interior_only",
         [&](const std::string& v, int l, const std::string& k) { spec.cdf_interior_only = to_bool(v, l, k); }},
        {"check_oracle",
         [&](const std::string& v, int l, const std::string& k) { spec.check_oracle = to_bool(v, l, k); }},
    };

    for (const auto& [key, entry] : section.entries) {
        if (key.rfind("expect_", 0) == 0) {
            const std::string what = key.substr(7);
            static const char* known[] = {"alpha", "beta", "gamma", "kurtosis_slope", "cost_slope"};
            if (std::find(std::begin(known), std::end(known), what) == std::end(known)) {
                throw ConfigError("unknown expectation '" + key + "'", entry.line);
            }
            spec.expect[what] = to_expectation(entry.value, entry.line, key);
            continue;
        }
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown key '" + key + "'", entry.line);
        it->second(entry.value, entry.line, key);
    }

    auto line_of = [&](const char* key) {
        const auto it = section.entries.find(key);
        return it == section.entries.end() ? section.line : it->second.line;
    };
    static const char* estimators[] = {"standard", "smoothed", "cond_exp",     "com",           "split",
                                       "branch",   "adaptive_h", "nested_plain", "nested_adaptive"};
    if (std::find(std::begin(estimators), std::end(estimators), spec.estimator) == std::end(estimators)) {
        throw ConfigError("unknown estimator '" + spec.estimator + "'", line_of("estimator"));
    }
    if (spec.model != "gbm" && spec.model != "gaussian_nested") {
        throw ConfigError("unknown model '" + spec.model + "'", line_of("model"));
    }
    if (is_nested(spec) != (spec.model == "gaussian_nested")) {
        throw ConfigError("nested estimators go with model gaussian_nested and vice versa", line_of("estimator"));
    }
    rethrow_with_line(line_of("payoff"), [&] { return parse_payoff_kind(spec.payoff); });
    if (spec.n_conv < 100) throw ConfigError("'n_conv' must be >= 100", line_of("n_conv"));
    if (spec.n0_steps < 1) throw ConfigError("'n0_steps' must be >= 1", line_of("n0_steps"));
    if (spec.m0 < 1) throw ConfigError("'m0' must be >= 1", line_of("m0"));
    if (spec.threads < 1) throw ConfigError("'threads' must be >= 1", line_of("threads"));
    if (spec.delta_rule != "fixed" && spec.delta_rule != "eps_quarter") {
        throw ConfigError("'delta_rule' must be fixed or eps_quarter", line_of("delta_rule"));
    }
    if (spec.kernel != "phi" && spec.kernel != "ramp" && spec.kernel != "phi_a2zero") {
        throw ConfigError("unknown kernel '" + spec.kernel + "'", line_of("kernel"));
    }
    if (!(spec.delta > 0.0)) throw ConfigError("'delta' must be > 0", line_of("delta"));
    if (spec.cdf_method != "smooth" && spec.cdf_method != "parity") {
        throw ConfigError("'cdf_method' must be smooth or parity", line_of("cdf_method"));
    }
    if (!(spec.maturity > 0.0)) throw ConfigError("'maturity' must be > 0", line_of("maturity"));
    return spec;
}

std::vector<ExperimentSpec> load_specs(const std::string& path) {
    std::vector<ExperimentSpec> specs;
    for (const auto& section : parse_config(read_file(path))) specs.push_back(spec_from_section(section));
    if (specs.empty()) throw ConfigError(path + ": no [experiment] sections");
    return specs;
}

SdeModel model_of(const ExperimentSpec& spec) { return gbm(spec.r, spec.sigma, spec.s0, spec.maturity); }

Payoff payoff_of(const ExperimentSpec& spec) {
    return Payoff{parse_payoff_kind(spec.payoff), spec.strike, {}};
}

MlmcConfig mlmc_config_of(const ExperimentSpec& spec) {
    MlmcConfig c;
    c.seed = spec.seed;
    c.l_min_fit = spec.l_min_fit;
    c.l_start = spec.l_start;
    c.l_max = spec.l_max;
    c.n_warm = spec.n_warm;
    c.n_min = spec.n_min;
    c.threads = spec.threads;
    c.alpha = spec.alpha;
    c.beta = spec.beta;
    c.gamma = spec.gamma;
    return c;
}

std::unique_ptr<LevelEstimator> make_estimator(const ExperimentSpec& spec, double epsilon) {
    if (is_nested(spec)) {
        return std::make_unique<NestedLevelEstimator>(gaussian_nested(spec.k_threshold, spec.m0),
                                                      spec.estimator == "nested_adaptive", spec.c_adapt);
    }
    PathEstimatorOptions o;
    o.kind = parse_estimator_kind(spec.estimator);
    o.scheme = spec.scheme;
    o.n0_steps = spec.n0_steps;
    o.split_rule = spec.m_splits_rule;
    o.split_final_scheme = spec.split_final_scheme;
    o.c_adapt = spec.c_adapt;
    if (o.kind == EstimatorKind::smoothed) {
        o.kernel = SmoothingKernel::named(spec.kernel, smoothing_delta(spec, epsilon));
    }
    return std::make_unique<PathLevelEstimator>(model_of(spec), payoff_of(spec), o);
}

double gbm_digital_value(double s0, double strike, double r, double sigma, double maturity) {
    const double d2 = (std::log(s0 / strike) + (r - 0.5 * sigma * sigma) * maturity) / (sigma * std::sqrt(maturity));
    return normal_cdf(d2);
}

double gbm_call_value(double s0, double strike, double r, double sigma, double maturity) {
    const double sd = sigma * std::sqrt(maturity);
    const double d1 = (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * maturity) / sd;
    return s0 * std::exp(r * maturity) * normal_cdf(d1) - strike * normal_cdf(d1 - sd);
}

double gbm_put_value(double s0, double strike, double r, double sigma, double maturity) {
    // Put-call parity for undiscounted values.
    return gbm_call_value(s0, strike, r, sigma, maturity) - s0 * std::exp(r * maturity) + strike;
}

double gbm_terminal_cdf(double x, double s0, double r, double sigma, double maturity) {
    if (x <= 0.0) return 0.0;
    return normal_cdf((std::log(x / s0) - (r - 0.5 * sigma * sigma) * maturity) / (sigma * std::sqrt(maturity)));
}

double gbm_terminal_density(double x, double s0, double r, double sigma, double maturity) {
    if (x <= 0.0) return 0.0;
    const double sd = sigma * std::sqrt(maturity);
    return normal_pdf((std::log(x / s0) - (r - 0.5 * sigma * sigma) * maturity) / sd) / (x * sd);
}

std::optional<double> oracle_value(const ExperimentSpec& spec) {
    if (spec.model == "gaussian_nested") return normal_cdf(-spec.k_threshold);
    if (spec.estimator == "smoothed") return std::nullopt;
    switch (parse_payoff_kind(spec.payoff)) {
        case PayoffKind::digital_call:
            return gbm_digital_value(spec.s0, spec.strike, spec.r, spec.sigma, spec.maturity);
        case PayoffKind::call:
            return gbm_call_value(spec.s0, spec.strike, spec.r, spec.sigma, spec.maturity);
        case PayoffKind::put:
            return gbm_put_value(spec.s0, spec.strike, spec.r, spec.sigma, spec.maturity);
        case PayoffKind::custom:
            break;
    }
    return std::nullopt;
}

std::string describe(const Check& c) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %s  %.6g in [%.6g, %.6g]", c.name.c_str(), c.pass ? "ok  " : "FAIL", c.value,
                  c.lo, c.hi);
    return buf;
}

bool ConvergenceReport::pass() const { return all_pass(checks); }
bool ComplexityReport::pass() const { return all_pass(checks); }
bool CdfReport::pass() const { return all_pass(checks); }

ConvergenceReport run_convergence(const ExperimentSpec& spec) {
    const auto estimator = make_estimator(spec, spec.epsilons.empty() ? 0.01 : spec.epsilons.front());
    ConvergenceReport rep;
    rep.name = spec.name;
    rep.expected = spec.expect;
    const StreamKey root(spec.seed);

    std::vector<double> means;
    std::vector<double> vars;
    std::vector<double> costs;
    std::vector<double> kurt;
    for (int l = spec.l_first; l <= spec.l_last; ++l) {
        std::vector<LevelMoments> m(estimator->outputs());
        sample_level(*estimator, l, 0, spec.n_conv, root, m, spec.threads);
        const MlmcResult s = summarize(std::span<const LevelMoments>(&m[0], 1), 0);
        LevelStats row = s.levels.front();
        row.level = l;
        rep.rows.push_back(row);
        means.push_back(row.mean);
        vars.push_back(row.variance);
        costs.push_back(row.cost);
        kurt.push_back(row.kurtosis);
        if (row.kurtosis > 100.0) {
            rep.warnings.push_back("level " + std::to_string(l) + " kurtosis " + fmt17(row.kurtosis) + " exceeds 100");
        }
    }

    try {
        rep.fitted = fit_rates(means, vars, costs, spec.l_min_fit, spec.l_first);
        for (const auto& w : rep.fitted.warnings) rep.warnings.push_back(w);
    } catch (const InsufficientData& e) {
        rep.fitted = Rates{kNaN, kNaN, kNaN, {}};
        rep.warnings.emplace_back(e.what());
    }
    try {
        rep.kurtosis_slope = fit_log2_slope(kurt, spec.l_min_fit, spec.l_first);
    } catch (const InsufficientData&) {
        rep.kurtosis_slope = kNaN;
    }

    const std::map<std::string, double> fitted = {{"alpha", rep.fitted.alpha},
                                                  {"beta", rep.fitted.beta},
                                                  {"gamma", rep.fitted.gamma},
                                                  {"kurtosis_slope", rep.kurtosis_slope}};
    for (const auto& [key, e] : spec.expect) {
        if (const auto it = fitted.find(key); it != fitted.end()) rep.checks.push_back(expectation_check(key, it->second, e));
    }
    return rep;
}

ComplexityReport run_complexity(const ExperimentSpec& spec) {
    if (spec.epsilons.empty()) throw InvalidInput(spec.name + ": complexity run needs 'epsilons'");
    ComplexityReport rep;
    rep.name = spec.name;
    const auto oracle = oracle_value(spec);
    std::vector<double> eps;
    std::vector<double> cost;
    for (double e : spec.epsilons) {
        const auto estimator = make_estimator(spec, e);
        ComplexityRow row;
        row.epsilon = e;
        row.oracle = oracle.value_or(kNaN);
        for (int rep_index = 0; rep_index < spec.replications; ++rep_index) {
            MlmcConfig config = mlmc_config_of(spec);
            if (rep_index > 0) config.seed = StreamKey(spec.seed, {static_cast<std::uint64_t>(rep_index)}).digest();
            MlmcResult res;
            try {
                res = run_mlmc(*estimator, e, config);
            } catch (const MaxLevelsExceeded& ex) {
                res = ex.partial();
                rep.warnings.push_back("eps " + fmtg(e) + ": " + ex.what());
            }
            row.total_cost += res.total_cost / spec.replications;
            row.mean_levels += static_cast<double>(res.levels.size()) / spec.replications;
            if (rep_index == 0) {
                row.estimate = res.estimate;
                row.abs_error = oracle ? std::abs(res.estimate - *oracle) : kNaN;
                row.levels = static_cast<int>(res.levels.size());
                for (const auto& w : res.warnings) rep.warnings.push_back("eps " + fmtg(e) + ": " + w);
                rep.runs.push_back(std::move(res));
            }
        }
        rep.rows.push_back(row);
        eps.push_back(e);
        cost.push_back(row.total_cost);
        if (spec.check_oracle && oracle) {
            rep.checks.push_back(make_check("abs_error@" + fmtg(e), row.abs_error, 0.0, 3.0 * e));
        }
    }
    rep.cost_slope = eps.size() >= 3 ? log_slope(eps, cost) : kNaN;
    if (const auto it = spec.expect.find("cost_slope"); it != spec.expect.end()) {
        rep.checks.push_back(expectation_check("cost_slope", rep.cost_slope, it->second));
    }
    return rep;
}

CdfReport run_cdf(const ExperimentSpec& spec) {
    if (spec.model != "gbm") throw InvalidInput(spec.name + ": CDF runs need model gbm");
    const SdeModel model = model_of(spec);
    const auto points = equispaced_points(spec.cdf_lo, spec.cdf_hi, spec.cdf_points);
    CdfOptions opt;
    opt.scheme = spec.scheme;
    opt.n0_steps = spec.n0_steps;
    opt.mlmc = mlmc_config_of(spec);
    const double eps = spec.cdf_epsilon;

    auto exact = [&](double x) { return gbm_terminal_cdf(x, spec.s0, spec.r, spec.sigma, spec.maturity); };
    auto density = [&](double x) { return gbm_terminal_density(x, spec.s0, spec.r, spec.sigma, spec.maturity); };

    const bool parity = spec.cdf_method == "parity";
    std::optional<SmoothingKernel> kernel;
    if (!parity) kernel = SmoothingKernel::named(spec.kernel, smoothing_delta(spec, eps));

    CdfReport rep{spec.name,
                  parity ? estimate_cdf_parity(model, points, eps, opt)
                         : estimate_cdf_smoothed(model, points, *kernel, eps, opt),
                  {},
                  0.0,
                  0.0,
                  {}};
    for (double x : points) rep.oracle.push_back(exact(x));

    // Interpolation error of the same construction applied to exact data.
    std::vector<double> exact_data;
    for (double x : points) {
        exact_data.push_back(parity ? gbm_put_value(spec.s0, x, spec.r, spec.sigma, spec.maturity) : exact(x));
    }
    const CubicSpline exact_spline(points, exact_data);

    const std::size_t first = spec.cdf_interior_only ? 1 : 0;
    const std::size_t last = spec.cdf_interior_only ? points.size() - 2 : points.size() - 1;
    constexpr int kSub = 8;
    double interp = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
        const int subs = i < last ? kSub : 1;
        for (int k = 0; k < subs; ++k) {
            const double x = points[i] + (i < last ? (points[i + 1] - points[i]) * k / kSub : 0.0);
            const double truth = exact(x);
            rep.sup_error = std::max(rep.sup_error, std::abs(rep.estimate.cdf(x) - truth));
            const double e = (parity ? exact_spline.derivative(x) : exact_spline(x)) - truth;
            interp = std::max(interp, std::abs(e));
        }
    }

    double bias = 0.0;
    if (kernel) {
        // H_delta(x - S) is the step at -x for the mirrored variable -S.
        const auto mirrored = [&](double u) { return density(-u); };
        for (double x : points) bias = std::max(bias, std::abs(bias_oracle(*kernel, mirrored, -x)));
    }
    rep.error_bound = eps + bias + interp;
    const double tol = spec.cdf_tolerance.value_or(3.0 * rep.error_bound);
    rep.checks.push_back(make_check("cdf_sup_error", rep.sup_error, 0.0, tol));
    return rep;
}

std::string convergence_csv(const ConvergenceReport& report) {
    std::string out = "level,n,mean,variance,cost,kurtosis\n";
    for (const auto& r : report.rows) {
        out += std::to_string(r.level) + "," + std::to_string(r.n) + "," + fmt17(r.mean) + "," + fmt17(r.variance) +
               "," + fmt17(r.cost) + "," + fmt17(r.kurtosis) + "\n";
    }
    return out;
}

std::string complexity_csv(const ComplexityReport& report) {
    std::string out = "epsilon,estimate,total_cost,oracle,abs_error\n";
    for (const auto& r : report.rows) {
        out += fmt17(r.epsilon) + "," + fmt17(r.estimate) + "," + fmt17(r.total_cost) + "," + fmt17(r.oracle) + "," +
               fmt17(r.abs_error) + "\n";
    }
    return out;
}

std::string cdf_csv(const CdfReport& report) {
    std::string out = "x,cdf,stderr\n";
    const auto& g = report.estimate.grid;
    for (std::size_t i = 0; i < g.points.size(); ++i) {
        out += fmt17(g.points[i]) + "," + fmt17(g.values[i]) + "," + fmt17(g.std_errors[i]) + "\n";
    }
    return out;
}

std::vector<LevelStats> parse_convergence_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "level,n,mean,variance,cost,kurtosis") {
        throw ConfigError("convergence CSV: unexpected header", 1);
    }
    std::vector<LevelStats> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6) throw ConfigError("convergence CSV: expected 6 fields", lineno);
        LevelStats s;
        s.level = static_cast<int>(to_int(f[0], lineno, "level"));
        s.n = to_int(f[1], lineno, "n");
        s.mean = to_double(f[2], lineno, "mean");
        s.variance = to_double(f[3], lineno, "variance");
        s.cost = to_double(f[4], lineno, "cost");
        s.kurtosis = to_double(f[5], lineno, "kurtosis");
        rows.push_back(s);
    }
    return rows;
}

std::string plot_script(const std::string& name) {
    std::string s = R"PY(#!/usr/bin/env python3
import csv
import math
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

NAME = "@NAME@"
HERE = os.path.dirname(os.path.abspath(__file__))


def load(kind):
    path = os.path.join(HERE, f"{NAME}_{kind}.csv")
    if not os.path.exists(path):
        return None
    with open(path, newline="") as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]


def log2(v):
    return math.log2(abs(v)) if v != 0 and math.isfinite(v) else float("nan")


conv = load("convergence")
comp = load("complexity")
fig, ax = plt.subplots(2, 2, figsize=(10, 8))
if conv:
    lv = [r["level"] for r in conv]
    ax[0, 0].plot(lv, [log2(r["variance"]) for r in conv], "o-")
    ax[0, 0].set_xlabel("level")
    ax[0, 0].set_ylabel("log2 variance")
    ax[0, 1].plot(lv, [log2(r["mean"]) for r in conv], "o-")
    ax[0, 1].set_xlabel("level")
    ax[0, 1].set_ylabel("log2 |mean|")
    ax[1, 0].semilogy(lv, [r["n"] for r in conv], "o-")
    ax[1, 0].set_xlabel("level")
    ax[1, 0].set_ylabel("N")
if comp:
    ax[1, 1].loglog([r["epsilon"] for r in comp], [r["total_cost"] for r in comp], "o-")
    ax[1, 1].set_xlabel("epsilon")
    ax[1, 1].set_ylabel("total cost")
fig.tight_layout()
out = os.path.join(HERE, f"{NAME}.png")
fig.savefig(out)
print(out, file=sys.stderr)
)PY";
    const std::string tag = "@NAME@";
    s.replace(s.find(tag), tag.size(), name);
    return s;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace {

std::vector<std::string> emit(const std::string& name, const std::string& kind, const std::string& csv,
                              const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + out_dir + "': " + ec.message());
    const auto base = std::filesystem::path(out_dir);
    const std::string csv_path = (base / (name + "_" + kind + ".csv")).string();
    const std::string plot_path = (base / (name + "_plot.py")).string();
    write_file(csv_path, csv);
    write_file(plot_path, plot_script(name));
    return {csv_path, plot_path};
}

}  // namespace

std::vector<std::string> emit_outputs(const ConvergenceReport& report, const std::string& out_dir) {
    return emit(report.name, "convergence", convergence_csv(report), out_dir);
}

std::vector<std::string> emit_outputs(const ComplexityReport& report, const std::string& out_dir) {
    return emit(report.name, "complexity", complexity_csv(report), out_dir);
}

std::vector<std::string> emit_outputs(const CdfReport& report, const std::string& out_dir) {
    return emit(report.name, "cdf", cdf_csv(report), out_dir);
}

}  // namespace mlmc
