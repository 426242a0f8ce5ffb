#pragma once

#include "mlmc/cdf.hpp"
#include "mlmc/core.hpp"
#include "mlmc/digital.hpp"
#include "mlmc/nested.hpp"
#include "mlmc/sde.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mlmc {

// ---------------------------------------------------------------------------
// Config files: "[name]" section headers followed by "key = value" lines.
// '#' and ';' start comments. Each section describes one experiment.

struct ConfigEntry {
    std::string value;
    int line = 0;
};

struct ConfigSection {
    std::string name;
    int line = 0;
    std::map<std::string, ConfigEntry> entries;
};

/// Throws ConfigError (with the offending line) on malformed input.
std::vector<ConfigSection> parse_config(const std::string& text);

/// Expected value of a fitted quantity with its tolerance, written "c +- tol".
struct Expectation {
    double center = 0.0;
    double tolerance = 0.0;

    bool accepts(double v) const { return std::abs(v - center) <= tolerance; }
};

struct ExperimentSpec {
    std::string name;
    std::string estimator = "standard";  // path estimators, nested_plain or nested_adaptive
    std::string payoff = "digital_call";
    Scheme scheme = Scheme::euler;
    std::string model = "gbm";
    double r = 0.05;
    double sigma = 0.2;
    double s0 = 1.0;
    double maturity = 1.0;
    double strike = 1.0;
    int n0_steps = 1;

    int l_first = 0;
    int l_last = 7;
    int l_min_fit = 2;
    std::int64_t n_conv = 100000;
    std::vector<double> epsilons;
    int replications = 1;  // independent MLMC runs per epsilon in complexity sweeps
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int threads = 1;

    // MLMC driver.
    int l_start = 2;
    int l_max = 12;
    std::int64_t n_warm = 1000;
    std::int64_t n_min = 32;
    // Fixed driver rates; 0 means estimated from the samples.
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    // Estimator parameters.
    std::string kernel = "phi";
    double delta = 0.05;
    std::string delta_rule = "fixed";  // or eps_quarter
    double delta_scale = 1.0;
    SplitRule m_splits_rule = SplitRule::sqrt;
    std::optional<Scheme> split_final_scheme;
    double c_adapt = 3.0;
    double k_threshold = 0.0;
    std::int64_t m0 = 1;

    // CDF runs.
    std::string cdf_method = "smooth";
    int cdf_points = 9;
    double cdf_lo = 0.6;
    double cdf_hi = 1.6;
    double cdf_epsilon = 0.01;
    std::optional<double> cdf_tolerance;  // default: 3 x combined error bound
    bool cdf_interior_only = false;

    bool check_oracle = false;
    std::map<std::string, Expectation> expect;  // alpha, beta, gamma, kurtosis_slope, cost_slope
};

/// Builds an experiment from one config section; unknown keys and bad values throw
/// ConfigError with their line numbers.
ExperimentSpec spec_from_section(const ConfigSection& section);

std::vector<ExperimentSpec> load_specs(const std::string& path);

SdeModel model_of(const ExperimentSpec& spec);
Payoff payoff_of(const ExperimentSpec& spec);
MlmcConfig mlmc_config_of(const ExperimentSpec& spec);

/// Level estimator described by the spec; epsilon feeds delta_rule eps_quarter.
std::unique_ptr<LevelEstimator> make_estimator(const ExperimentSpec& spec, double epsilon = 0.0);

/// Exact value of the experiment's target when one is known in closed form.
std::optional<double> oracle_value(const ExperimentSpec& spec);

// Closed-form GBM quantities (undiscounted expectations at maturity).
double gbm_digital_value(double s0, double strike, double r, double sigma, double maturity);
double gbm_call_value(double s0, double strike, double r, double sigma, double maturity);
double gbm_put_value(double s0, double strike, double r, double sigma, double maturity);
double gbm_terminal_cdf(double x, double s0, double r, double sigma, double maturity);
double gbm_terminal_density(double x, double s0, double r, double sigma, double maturity);

struct Check {
    std::string name;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = false;
};

std::string describe(const Check& check);

struct ConvergenceReport {
    std::string name;
    std::vector<LevelStats> rows;
    Rates fitted;
    double kurtosis_slope = 0.0;  // NaN when it cannot be fitted
    std::map<std::string, Expectation> expected;
    std::vector<Check> checks;
    std::vector<std::string> warnings;

    bool pass() const;
};

/// N_conv samples on every level of [l_first, l_last] with rates fitted from
/// l_min_fit.
ConvergenceReport run_convergence(const ExperimentSpec& spec);

struct ComplexityRow {
    double epsilon = 0.0;
    double estimate = 0.0;
    double total_cost = 0.0;
    double oracle = 0.0;  // NaN without an oracle
    double abs_error = 0.0;
    int levels = 0;
    double mean_levels = 0.0;
};

struct ComplexityReport {
    std::string name;
    std::vector<ComplexityRow> rows;
    double cost_slope = 0.0;  // slope of log cost against log epsilon; NaN below 3 rows
    std::vector<MlmcResult> runs;
    std::vector<Check> checks;
    std::vector<std::string> warnings;

    bool pass() const;
};

/// One MLMC run per epsilon and replication. Row estimates, errors and level
/// counts come from the first replication (seed as given); total_cost is the
/// mean over all replications, later ones seeded from (seed, r).
ComplexityReport run_complexity(const ExperimentSpec& spec);

struct CdfReport {
    std::string name;
    CdfEstimate estimate;
    std::vector<double> oracle;  // exact CDF at the points
    double sup_error = 0.0;
    double error_bound = 0.0;  // epsilon + smoothing bias + interpolation error
    std::vector<Check> checks;

    bool pass() const;
};

CdfReport run_cdf(const ExperimentSpec& spec);

/// CSV layouts: level,n,mean,variance,cost,kurtosis / epsilon,estimate,
/// total_cost,oracle,abs_error / x,cdf,stderr. Numbers use 17 significant digits.
std::string convergence_csv(const ConvergenceReport& report);
std::string complexity_csv(const ComplexityReport& report);
std::string cdf_csv(const CdfReport& report);

/// Parses convergence_csv output back into level rows.
std::vector<LevelStats> parse_convergence_csv(const std::string& text);

/// matplotlib script drawing log2 V_l, log2 |mean_l|, N_l and cost against
/// epsilon from the CSV files next to it.
std::string plot_script(const std::string& name);

/// Writes <out_dir>/<name>_<kind>.csv and <name>_plot.py; returns the paths.
std::vector<std::string> emit_outputs(const ConvergenceReport& report, const std::string& out_dir);
std::vector<std::string> emit_outputs(const ComplexityReport& report, const std::string& out_dir);
std::vector<std::string> emit_outputs(const CdfReport& report, const std::string& out_dir);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace mlmc
