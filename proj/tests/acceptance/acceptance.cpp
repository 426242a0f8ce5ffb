#include "mlmc/errors.hpp"
#include "mlmc/harness.hpp"
#include "mlmc/smoothing.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

using namespace mlmc;

namespace {

struct Outcome {
    std::vector<std::string> details;
    std::vector<Check> checks;
    std::map<std::string, std::string> outputs;  // file name -> contents

    bool pass() const {
        if (checks.empty()) return false;
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Check range_check(const std::string& name, double value, double lo, double hi) {
    return {name, value, lo, hi, value >= lo && value <= hi};
}

ExperimentSpec load(const std::string& file, const std::string& name) {
    for (auto& s : load_specs(std::string(MLMC_EXPERIMENTS_DIR) + "/" + file)) {
        if (s.name == name) return s;
    }
    throw std::runtime_error(file + ": no section [" + name + "]");
}

std::vector<ExperimentSpec> load_all(const std::string& file) {
    return load_specs(std::string(MLMC_EXPERIMENTS_DIR) + "/" + file);
}

void take_checks(Outcome& o, const std::string& prefix, const std::vector<Check>& checks) {
    for (auto c : checks) {
        c.name = prefix + " " + c.name;
        o.checks.push_back(c);
    }
}

ConvergenceReport add_convergence(Outcome& o, const ExperimentSpec& spec) {
    auto rep = run_convergence(spec);
    o.details.push_back("[" + spec.name + "] level          mean      variance          cost  kurtosis");
    for (const auto& r : rep.rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %5d %13.5e %13.5e %13.5e %9.2f", r.level, r.mean, r.variance, r.cost,
                      r.kurtosis);
        o.details.emplace_back(buf);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "  alpha=%.3f beta=%.3f gamma=%.3f kurtosis_slope=%.3f", rep.fitted.alpha,
                  rep.fitted.beta, rep.fitted.gamma, rep.kurtosis_slope);
    o.details.emplace_back(buf);
    take_checks(o, spec.name, rep.checks);
    o.outputs[spec.name + "_convergence.csv"] = convergence_csv(rep);
    return rep;
}

void add_complexity(Outcome& o, const ExperimentSpec& spec) {
    const auto rep = run_complexity(spec);
    o.details.push_back("[" + spec.name + "]   epsilon      estimate    total_cost     abs_error  mean_levels");
    for (const auto& r : rep.rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %10.4g %13.6f %13.6g %13.3e %12.2f", r.epsilon, r.estimate, r.total_cost,
                      r.abs_error, r.mean_levels);
        o.details.emplace_back(buf);
    }
    if (std::isfinite(rep.cost_slope)) o.details.push_back("  cost_slope=" + fmt("%.3f", rep.cost_slope));
    take_checks(o, spec.name, rep.checks);
    o.outputs[spec.name + "_complexity.csv"] = complexity_csv(rep);
}

void add_cdf(Outcome& o, const ExperimentSpec& spec) {
    const auto rep = run_cdf(spec);
    o.details.push_back("[" + spec.name + "] method=" + rep.estimate.method +
                        " sup_error=" + fmt("%.4g", rep.sup_error) + " error_bound=" + fmt("%.4g", rep.error_bound));
    for (const auto& w : rep.estimate.warnings) o.details.push_back("  warning: " + w);
    take_checks(o, spec.name, rep.checks);
    o.outputs[spec.name + "_cdf.csv"] = cdf_csv(rep);
}

void convergence_file(Outcome& o, const std::string& file) {
    for (const auto& s : load_all(file)) add_convergence(o, s);
}

Outcome criterion_lipschitz() {
    Outcome o;
    convergence_file(o, "c01_lipschitz.ini");
    return o;
}

Outcome criterion_standard() {
    Outcome o;
    convergence_file(o, "c02_digital_standard.ini");
    return o;
}

Outcome criterion_cond_exp() {
    Outcome o;
    convergence_file(o, "c03_cond_exp.ini");
    return o;
}

Outcome criterion_change_of_measure() {
    Outcome o;
    const auto spec = load("c04_change_of_measure.ini", "digital_com_milstein");
    add_convergence(o, spec);

    // E[R | conditioning data] = 1 for both weights, one fixed state per level.
    const SdeModel model = model_of(spec);
    const int n = 1000000;
    std::string text = "level,weight,mean,std_error\n";
    for (std::uint64_t level : {2, 7}) {
        GaussianStream path{StreamKey(spec.seed, {1, level})};
        const auto st = simulate_coupled(model, static_cast<int>(level), spec.n0_steps, spec.scheme, path);
        const auto f = fine_conditional_law(st, model);
        const auto g = coarse_conditional_law(st, model);
        const auto m = midpoint_measure(f, g);
        GaussianStream draws{StreamKey(spec.seed, {2, level})};
        double sf = 0.0, sf2 = 0.0, sc = 0.0, sc2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = m.mu + m.sigma * draws.next();
            const double rf = radon_nikodym(f, m, x);
            const double rc = radon_nikodym(g, m, x);
            sf += rf;
            sf2 += rf * rf;
            sc += rc;
            sc2 += rc * rc;
        }
        for (auto [label, s1, s2] : {std::tuple{"fine", sf, sf2}, std::tuple{"coarse", sc, sc2}}) {
            const double mean = s1 / n;
            const double se = std::sqrt((s2 / n - mean * mean) / n);
            const std::string name = std::string("R_") + label + "@" + std::to_string(level);
            o.checks.push_back(range_check(name, mean, 1.0 - 3.0 * se, 1.0 + 3.0 * se));
            text += std::to_string(level) + "," + label + "," + fmt("%.17g", mean) + "," + fmt("%.17g", se) + "\n";
        }
    }
    o.outputs["digital_com_milstein_weights.csv"] = text;
    return o;
}

Outcome criterion_split() {
    Outcome o;
    const auto split = add_convergence(o, load("c05_split.ini", "digital_split_milstein"));
    const auto ref = add_convergence(o, load("c05_split.ini", "digital_split_reference"));
    // Per-sample cost inflation over levels 2-7, level by level and in total.
    double cs = 0.0;
    double cr = 0.0;
    for (std::size_t i = 0; i < split.rows.size(); ++i) {
        const int l = split.rows[i].level;
        if (l < 2 || l > 7) continue;
        cs += split.rows[i].cost;
        cr += ref.rows[i].cost;
        o.details.push_back("  level " + std::to_string(l) + " cost inflation " +
                            fmt("%.2f%%", 100.0 * (split.rows[i].cost / ref.rows[i].cost - 1.0)));
    }
    o.checks.push_back(range_check("split cost_inflation(levels 2-7)", cs / cr - 1.0, 0.0, 0.15));
    return o;
}

Outcome criterion_branch() {
    Outcome o;
    const auto rep = add_convergence(o, load("c06_branch.ini", "digital_branch_euler"));
    for (const auto& r : rep.rows) {
        if (r.level < 2 || r.level > 7) continue;
        const double bound = 1.1 * (r.level / 2.0) * std::exp2(r.level);
        o.checks.push_back(range_check("branch cost@" + std::to_string(r.level), r.cost, 0.0, bound));
    }
    return o;
}

Outcome criterion_adaptive_timestep() {
    Outcome o;
    convergence_file(o, "c07_adaptive_timestep.ini");
    return o;
}

Outcome criterion_nested_plain() {
    Outcome o;
    add_convergence(o, load("c08_nested_plain.ini", "nested_plain"));
    add_complexity(o, load("c08_nested_plain.ini", "nested_plain_estimate"));
    return o;
}

Outcome criterion_nested_adaptive() {
    Outcome o;
    convergence_file(o, "c09_nested_adaptive.ini");
    return o;
}

Outcome criterion_complexity() {
    Outcome o;
    for (const auto& s : load_all("c10_complexity.ini")) add_complexity(o, s);
    return o;
}

Outcome criterion_smoothing() {
    Outcome o;
    const auto phi = SmoothingKernel::phi(1.0);
    const double a1 = moment_coefficient(phi, 1);
    const double a2 = moment_coefficient(phi, 2);
    const double a3 = moment_coefficient(phi, 3);
    o.checks.push_back(range_check("phi |a1|", std::abs(a1), 0.0, 1e-7));
    o.checks.push_back(range_check("phi a2", a2, -0.5 - 1e-6, -0.5 + 1e-6));
    o.checks.push_back(range_check("phi |a3|", std::abs(a3), 0.0, 1e-7));

    // Standard normal density, strike 0.5.
    const auto rho = [](double x) { return normal_pdf(x); };
    std::vector<double> lx;
    std::vector<double> ly;
    std::string text = "delta,bias\n";
    for (double delta : {0.4, 0.2, 0.1}) {
        const double b = bias_oracle(SmoothingKernel::phi_a2zero(delta), rho, 0.5);
        lx.push_back(std::log2(delta));
        ly.push_back(std::log2(std::abs(b)));
        text += fmt("%.17g", delta) + "," + fmt("%.17g", b) + "\n";
        o.details.push_back("  delta=" + fmt("%.2f", delta) + " bias=" + fmt("%.6e", b));
    }
    const double mx = (lx[0] + lx[1] + lx[2]) / 3.0;
    const double my = (ly[0] + ly[1] + ly[2]) / 3.0;
    double sxy = 0.0;
    double sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    o.checks.push_back(range_check("a2zero bias_slope", sxy / sxx, 3.7, 4.3));
    o.outputs["smoothing.csv"] = "a1,a2,a3\n" + fmt("%.17g", a1) + "," + fmt("%.17g", a2) + "," + fmt("%.17g", a3) +
                                 "\n" + text;
    return o;
}

Outcome criterion_oracles() {
    Outcome o;
    for (const auto& s : load_all("c12_oracles.ini")) add_complexity(o, s);
    for (const auto& s : load_all("c12_cdf.ini")) add_cdf(o, s);
    return o;
}

struct Criterion {
    const char* title;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list = {
        {"Lipschitz baseline rates", criterion_lipschitz},
        {"digital standard estimator rates", criterion_standard},
        {"conditional expectation rates", criterion_cond_exp},
        {"change of measure rates and unit-mean weights", criterion_change_of_measure},
        {"final-step splitting rates and cost", criterion_split},
        {"branching splitting rates and cost", criterion_branch},
        {"adaptive timestep rates", criterion_adaptive_timestep},
        {"plain nested simulation", criterion_nested_plain},
        {"adaptive nested simulation", criterion_nested_adaptive},
        {"complexity sweeps", criterion_complexity},
        {"smoothing kernel coefficients and bias", criterion_smoothing},
        {"MLMC estimates against oracles", criterion_oracles},
    };
    return list;
}

Outcome criterion_determinism() {
    Outcome o;
    const auto& list = criteria();
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto first = list[i].run();
        const auto second = list[i].run();
        std::size_t bytes = 0;
        for (const auto& [name, text] : first.outputs) bytes += text.size();
        const bool same = !first.outputs.empty() && first.outputs == second.outputs;
        const std::string name = "criterion " + std::to_string(i + 1) + " identical";
        o.checks.push_back({name, same ? 1.0 : 0.0, 1.0, 1.0, same});
        o.details.push_back("  criterion " + std::to_string(i + 1) + ": " + std::to_string(first.outputs.size()) +
                            " outputs, " + std::to_string(bytes) + " bytes, " + (same ? "identical" : "DIFFERENT"));
    }
    return o;
}

void write_outputs(const Outcome& o, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : o.outputs) write_file((dir / name).string(), text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks for the MLMC library; one PASS/FAIL line per criterion."};
    int number = 0;
    std::string out_dir = "acceptance_out";
    app.add_option("criterion", number, "criterion number")->required()->check(CLI::Range(1, 13));
    app.add_option("--out", out_dir, "directory for CSV outputs");
    CLI11_PARSE(app, argc, argv);

    const std::string title = number == 13 ? "determinism of all outputs" : criteria()[number - 1].title;
    Outcome o;
    try {
        o = number == 13 ? criterion_determinism() : criteria()[number - 1].run();
    } catch (const std::exception& e) {
        std::printf("FAIL  criterion %d: %s (error: %s)\n", number, title.c_str(), e.what());
        return 1;
    }
    for (const auto& d : o.details) std::printf("%s\n", d.c_str());
    for (const auto& c : o.checks) std::printf("  %s\n", describe(c).c_str());
    if (!o.outputs.empty()) {
        char id[8];
        std::snprintf(id, sizeof id, "c%02d", number);
        write_outputs(o, std::filesystem::path(out_dir) / id);
    }
    const bool pass = o.pass();
    std::printf("%s  criterion %d: %s\n", pass ? "PASS" : "FAIL", number, title.c_str());
    return pass ? 0 : 1;
}
