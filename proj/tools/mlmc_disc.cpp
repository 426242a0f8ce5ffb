// mlmc-disc: convergence, complexity and CDF studies for discontinuous payoffs.

#include "mlmc/errors.hpp"
#include "mlmc/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
    std::string section;
};

std::vector<mlmc::ExperimentSpec> load(const std::string& path, const Overrides& o) {
    std::vector<mlmc::ExperimentSpec> specs;
    for (auto& s : mlmc::load_specs(path)) {
        if (!o.section.empty() && s.name != o.section) continue;
        if (o.seed) s.seed = *o.seed;
        if (o.threads) s.threads = *o.threads;
        if (o.out) s.out_dir = *o.out;
        specs.push_back(std::move(s));
    }
    if (specs.empty()) throw mlmc::ConfigError("no section named '" + o.section + "' in " + path);
    return specs;
}

void print_checks(const std::vector<mlmc::Check>& checks) {
    for (const auto& c : checks) std::printf("  %s\n", mlmc::describe(c).c_str());
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::printf("  warning: %s\n", w.c_str());
}

void print_files(const std::vector<std::string>& files) {
    for (const auto& f : files) std::printf("  wrote %s\n", f.c_str());
}

bool convergence(const std::string& path, const Overrides& o) {
    bool ok = true;
    for (const auto& spec : load(path, o)) {
        const auto rep = mlmc::run_convergence(spec);
        std::printf("[%s] estimator=%s scheme=%s\n", spec.name.c_str(), spec.estimator.c_str(),
                    std::string(mlmc::to_string(spec.scheme)).c_str());
        std::printf("  %5s %9s %14s %14s %12s %10s\n", "level", "n", "mean", "variance", "cost", "kurtosis");
        for (const auto& r : rep.rows) {
            std::printf("  %5d %9lld %14.6e %14.6e %12.4g %10.4g\n", r.level, static_cast<long long>(r.n), r.mean,
                        r.variance, r.cost, r.kurtosis);
        }
        std::printf("  alpha=%.3f beta=%.3f gamma=%.3f kurtosis_slope=%.3f\n", rep.fitted.alpha, rep.fitted.beta,
                    rep.fitted.gamma, rep.kurtosis_slope);
        print_checks(rep.checks);
        print_warnings(rep.warnings);
        print_files(mlmc::emit_outputs(rep, spec.out_dir));
        ok = ok && rep.pass();
    }
    return ok;
}

bool complexity(const std::string& path, const Overrides& o) {
    bool ok = true;
    for (const auto& spec : load(path, o)) {
        const auto rep = mlmc::run_complexity(spec);
        std::printf("[%s] estimator=%s scheme=%s\n", spec.name.c_str(), spec.estimator.c_str(),
                    std::string(mlmc::to_string(spec.scheme)).c_str());
        std::printf("  %10s %12s %14s %12s %12s %6s %11s\n", "epsilon", "estimate", "total_cost", "oracle",
                    "abs_error", "levels", "mean_levels");
        for (const auto& r : rep.rows) {
            std::printf("  %10.4g %12.6f %14.6g %12.6f %12.3e %6d %11.2f\n", r.epsilon, r.estimate, r.total_cost,
                        r.oracle, r.abs_error, r.levels, r.mean_levels);
        }
        std::printf("  cost_slope=%.3f\n", rep.cost_slope);
        print_checks(rep.checks);
        print_warnings(rep.warnings);
        print_files(mlmc::emit_outputs(rep, spec.out_dir));
        ok = ok && rep.pass();
    }
    return ok;
}

bool cdf(const std::string& path, const Overrides& o, const std::string& method, int points,
         const std::string& range) {
    bool ok = true;
    for (auto spec : load(path, o)) {
        if (!method.empty()) spec.cdf_method = method;
        if (points > 0) spec.cdf_points = points;
        if (!range.empty()) {
            const auto colon = range.find(':');
            if (colon == std::string::npos) throw mlmc::InvalidInput("--range expects lo:hi");
            spec.cdf_lo = std::stod(range.substr(0, colon));
            spec.cdf_hi = std::stod(range.substr(colon + 1));
        }
        const auto rep = mlmc::run_cdf(spec);
        std::printf("[%s] method=%s points=%d\n", spec.name.c_str(), spec.cdf_method.c_str(), spec.cdf_points);
        const auto& g = rep.estimate.grid;
        std::printf("  %10s %12s %12s %12s\n", "x", "cdf", "stderr", "exact");
        for (std::size_t i = 0; i < g.points.size(); ++i) {
            std::printf("  %10.4f %12.6f %12.3e %12.6f\n", g.points[i], g.values[i], g.std_errors[i], rep.oracle[i]);
        }
        std::printf("  sup_error=%.4g error_bound=%.4g\n", rep.sup_error, rep.error_bound);
        print_checks(rep.checks);
        print_warnings(rep.estimate.warnings);
        print_files(mlmc::emit_outputs(rep, spec.out_dir));
        ok = ok && rep.pass();
    }
    return ok;
}

void rates(const std::string& path, int fit_from) {
    const auto rows = mlmc::parse_convergence_csv(mlmc::read_file(path));
    if (rows.empty()) throw mlmc::InsufficientData(path + ": no rows");
    std::vector<double> means, vars, costs, kurt;
    for (const auto& r : rows) {
        if (r.level != rows.front().level + static_cast<int>(means.size())) {
            throw mlmc::ConfigError(path + ": levels must be consecutive");
        }
        means.push_back(r.mean);
        vars.push_back(r.variance);
        costs.push_back(r.cost);
        kurt.push_back(r.kurtosis);
    }
    const auto fitted = mlmc::fit_rates(means, vars, costs, fit_from, rows.front().level);
    std::printf("alpha=%.4f beta=%.4f gamma=%.4f", fitted.alpha, fitted.beta, fitted.gamma);
    try {
        std::printf(" kurtosis_slope=%.4f", mlmc::fit_log2_slope(kurt, fit_from, rows.front().level));
    } catch (const mlmc::InsufficientData&) {
    }
    std::printf("\n");
    for (const auto& w : fitted.warnings) std::printf("warning: %s\n", w.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilevel Monte Carlo studies for discontinuous functionals"};
    app.require_subcommand(1);

    Overrides o;
    std::string spec_path;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("spec", spec_path, "Experiment file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override the seed of every experiment");
        sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--section", o.section, "Run only this experiment");
    };

    auto* conv = app.add_subcommand("convergence", "Fixed samples per level; fitted rates");
    add_common(conv);
    auto* comp = app.add_subcommand("complexity", "MLMC cost against epsilon");
    add_common(comp);
    auto* cdf_cmd = app.add_subcommand("cdf", "Spline estimate of the terminal CDF");
    add_common(cdf_cmd);
    std::string method;
    int points = 0;
    std::string range;
    cdf_cmd->add_option("--method", method, "smooth or parity")->check(CLI::IsMember({"smooth", "parity"}));
    cdf_cmd->add_option("--points", points, "Number of spline points")->check(CLI::Range(4, 100000));
    cdf_cmd->add_option("--range", range, "Point range lo:hi");

    auto* rates_cmd = app.add_subcommand("rates", "Fit rates to a convergence CSV");
    std::string csv_path;
    int fit_from = 2;
    rates_cmd->add_option("csv", csv_path, "Convergence CSV")->required()->check(CLI::ExistingFile);
    rates_cmd->add_option("--fit-from", fit_from, "First level used in the fit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        bool ok = true;
        if (*conv) ok = convergence(spec_path, o);
        if (*comp) ok = complexity(spec_path, o);
        if (*cdf_cmd) ok = cdf(spec_path, o, method, points, range);
        if (*rates_cmd) rates(csv_path, fit_from);
        return ok ? 0 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
