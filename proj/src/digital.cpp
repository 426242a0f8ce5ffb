#include "mlmc/digital.hpp"

#include "mlmc/errors.hpp"

#include <cmath>
#include <map>
#include <string>

namespace mlmc {

namespace {

void require_digital(const Payoff& payoff, const char* who) {
    if (payoff.kind != PayoffKind::digital_call) {
        throw InvalidInput(std::string(who) + ": requires a digital_call payoff");
    }
}

double checked_diffusion(const SdeModel& model, double s) {
    const double b = model.diffusion(s);
    if (b == 0.0) throw DegenerateDiffusion("diffusion vanishes at the conditioning state");
    return b;
}

}  // namespace

double Payoff::operator()(double s) const {
    switch (kind) {
        case PayoffKind::digital_call:
            return heaviside(s - strike);
        case PayoffKind::call:
            return std::max(s - strike, 0.0);
        case PayoffKind::put:
            return std::max(strike - s, 0.0);
        case PayoffKind::custom:
            return custom(s);
    }
    return 0.0;
}

PayoffKind parse_payoff_kind(std::string_view name) {
    if (name == "digital_call" || name == "digital") return PayoffKind::digital_call;
    if (name == "call") return PayoffKind::call;
    if (name == "put") return PayoffKind::put;
    throw InvalidInput("unknown payoff '" + std::string(name) + "'");
}

ConditionalLaw fine_conditional_law(const CoupledPathState& state, const SdeModel& model) {
    const double s = state.fine_penultimate;
    const double b = checked_diffusion(model, s);
    return {s + model.drift(s) * state.h_fine, std::abs(b) * std::sqrt(state.h_fine)};
}

ConditionalLaw coarse_conditional_law(const CoupledPathState& state, const SdeModel& model) {
    const double s = state.coarse_penultimate;
    const double b = checked_diffusion(model, s);
    return {s + model.drift(s) * state.h_coarse + b * state.dw_second_last, std::abs(b) * std::sqrt(state.h_fine)};
}

CommonMeasure midpoint_measure(const ConditionalLaw& fine, const ConditionalLaw& coarse) {
    return {0.5 * (fine.mean + coarse.mean), std::max(fine.sd, coarse.sd)};
}

double radon_nikodym(const ConditionalLaw& law, const CommonMeasure& measure, double x) {
    const double zl = (x - law.mean) / law.sd;
    const double zm = (x - measure.mu) / measure.sigma;
    return (measure.sigma / law.sd) * std::exp(-0.5 * zl * zl + 0.5 * zm * zm);
}

Correction y_standard(const CoupledPathState& state, const Payoff& payoff) {
    Correction c;
    c.fine = payoff(state.fine_terminal);
    c.coarse = state.has_coarse ? payoff(state.coarse_terminal) : 0.0;
    c.cost = static_cast<double>(state.cost);
    return c;
}

Correction y_conditional_expectation(const CoupledPathState& state, const SdeModel& model, const Payoff& payoff) {
    require_digital(payoff, "y_conditional_expectation");
    Correction c;
    c.cost = static_cast<double>(state.cost);
    const ConditionalLaw f = fine_conditional_law(state, model);
    c.fine = normal_cdf((f.mean - payoff.strike) / f.sd);
    if (state.has_coarse) {
        const ConditionalLaw g = coarse_conditional_law(state, model);
        c.coarse = normal_cdf((g.mean - payoff.strike) / g.sd);
    }
    return c;
}

Correction y_change_of_measure(const CoupledPathState& state, const SdeModel& model, const Payoff& payoff,
                               GaussianStream& stream, const MeasureRule& rule) {
    Correction c;
    c.cost = static_cast<double>(state.cost);
    const ConditionalLaw f = fine_conditional_law(state, model);
    const CommonMeasure m = state.has_coarse ? rule(f, coarse_conditional_law(state, model))
                                             : CommonMeasure{f.mean, f.sd};
    const double x = m.mu + m.sigma * stream.next();
    const double f_mu = payoff(m.mu);
    const double jump = payoff(x) - f_mu;
    c.fine = f_mu + jump * radon_nikodym(f, m, x);
    if (state.has_coarse) c.coarse = f_mu + jump * radon_nikodym(coarse_conditional_law(state, model), m, x);
    return c;
}

Correction y_smoothed(const CoupledPathState& state, const Payoff& payoff, const SmoothingKernel& kernel) {
    Correction c;
    c.cost = static_cast<double>(state.cost);
    c.fine = eval_hdelta(kernel, state.fine_terminal - payoff.strike);
    if (state.has_coarse) c.coarse = eval_hdelta(kernel, state.coarse_terminal - payoff.strike);
    return c;
}

Correction y_split_final(const SdeModel& model, const Payoff& payoff, int level, int n0_steps, Scheme scheme,
                         int m_splits, GaussianStream& stream, std::optional<Scheme> final_scheme) {
    if (m_splits < 1) throw InvalidInput("y_split_final: m_splits must be >= 1");
    if (level < 0 || n0_steps < 1) throw InvalidInput("y_split_final: need level >= 0 and n0_steps >= 1");
    const Scheme last = final_scheme.value_or(scheme);
    const std::int64_t nf = static_cast<std::int64_t>(n0_steps) << level;
    const double hf = model.maturity / static_cast<double>(nf);
    const double sqrt_hf = std::sqrt(hf);

    Correction c;
    c.cost = static_cast<double>(nf - 1 + m_splits);
    double fine_sum = 0.0;
    double coarse_sum = 0.0;

    if (level == 0) {
        double s = model.s0;
        for (std::int64_t k = 0; k + 1 < nf; ++k) s = step(model, s, sqrt_hf * stream.next(), hf, scheme);
        for (int i = 0; i < m_splits; ++i) fine_sum += payoff(step(model, s, sqrt_hf * stream.next(), hf, last));
        c.fine = fine_sum / m_splits;
        return c;
    }

    const CoupledPair pre = advance_coupled(model, {model.s0, model.s0}, nf / 2 - 1, hf, scheme, stream);
    const double dw_second_last = sqrt_hf * stream.next();
    const double fine_mid = step(model, pre.fine, dw_second_last, hf, scheme);
    for (int i = 0; i < m_splits; ++i) {
        const double dw_last = sqrt_hf * stream.next();
        fine_sum += payoff(step(model, fine_mid, dw_last, hf, last));
        coarse_sum += payoff(step(model, pre.coarse, dw_second_last + dw_last, 2.0 * hf, last));
    }
    c.fine = fine_sum / m_splits;
    c.coarse = coarse_sum / m_splits;
    return c;
}

BranchTree branching_layout(int level, int n0_steps, double maturity) {
    BranchTree t;
    const std::int64_t nf = static_cast<std::int64_t>(n0_steps) << level;
    if (level == 0) {
        t.leaves = 1;
        t.fine_steps = nf;
        return t;
    }
    for (int k = 1; k <= level - 1; ++k) t.split_times.push_back(maturity * (1.0 - std::exp2(-k)));
    t.leaves = std::int64_t{1} << (level - 1);
    // Segment k (k < level - 1) covers T 2^-(k+1) and is run by 2^k branches;
    // the last covers one coarse step's worth, T 2^-(level-1), on every leaf.
    for (int k = 0; k < level - 1; ++k) t.fine_steps += (std::int64_t{1} << k) * (nf >> (k + 1));
    t.fine_steps += t.leaves * (nf >> (level - 1));
    return t;
}

Correction y_branching_split(const SdeModel& model, const Payoff& payoff, int level, int n0_steps, Scheme scheme,
                             GaussianStream& stream) {
    if (level < 0 || n0_steps < 1) throw InvalidInput("y_branching_split: need level >= 0 and n0_steps >= 1");
    if (level == 0) return y_standard(simulate_coupled(model, 0, n0_steps, scheme, stream), payoff);

    const std::int64_t nf = static_cast<std::int64_t>(n0_steps) << level;
    const double hf = model.maturity / static_cast<double>(nf);
    const int last_segment = level - 1;

    // Coarse steps in segment k.
    auto segment_steps = [&](int k) -> std::int64_t {
        const std::int64_t nc = nf / 2;
        return k < last_segment ? nc >> (k + 1) : nc >> last_segment;
    };

    Correction c;
    std::int64_t steps = 0;
    auto descend = [&](auto&& self, CoupledPair state, int k, GaussianStream& s) -> void {
        const std::int64_t n = segment_steps(k);
        state = advance_coupled(model, state, n, hf, scheme, s);
        steps += 2 * n;
        if (k == last_segment) {
            c.fine += payoff(state.fine);
            c.coarse += payoff(state.coarse);
            return;
        }
        for (std::uint64_t child = 0; child < 2; ++child) {
            GaussianStream branch = s.child(child);
            self(self, state, k + 1, branch);
        }
    };
    descend(descend, CoupledPair{model.s0, model.s0}, 0, stream);

    const double leaves = std::exp2(level - 1);
    c.fine /= leaves;
    c.coarse /= leaves;
    c.cost = static_cast<double>(steps);
    return c;
}

Correction y_adaptive_timestep(const SdeModel& model, const Payoff& payoff, int level, int n0_steps, Scheme scheme,
                               GaussianStream& stream, double c_adapt, AdaptiveTrace* trace) {
    require_digital(payoff, "y_adaptive_timestep");
    if (level < 0 || n0_steps < 1) throw InvalidInput("y_adaptive_timestep: need level >= 0 and n0_steps >= 1");

    // Resolution j means step h0 / 2^j; j = -1 is the coarse starting grid.
    const std::int64_t n_base = static_cast<std::int64_t>(n0_steps) << level;
    const double h0 = model.maturity / static_cast<double>(n_base);

    std::vector<std::vector<double>> increments;  // increments[j] for j >= 0
    {
        const double sqrt_h0 = std::sqrt(h0);
        std::vector<double> base(static_cast<std::size_t>(n_base));
        for (auto& dw : base) dw = sqrt_h0 * stream.next();
        increments.push_back(std::move(base));
    }
    std::map<int, double> terminal_at;
    std::int64_t cost = 0;

    auto terminal = [&](int j) {
        if (auto it = terminal_at.find(j); it != terminal_at.end()) return it->second;
        double s;
        if (j < 0) {
            const auto& base = increments.front();
            std::vector<double> coarse(base.size() / 2);
            for (std::size_t i = 0; i < coarse.size(); ++i) coarse[i] = base[2 * i] + base[2 * i + 1];
            s = simulate_on_increments(model, scheme, 2.0 * h0, coarse);
        } else {
            while (static_cast<int>(increments.size()) <= j) {
                const int have = static_cast<int>(increments.size()) - 1;
                increments.push_back(bridge_refine(increments.back(), h0 / std::exp2(have), 1, stream));
            }
            s = simulate_on_increments(model, scheme, h0 / std::exp2(j), increments[j]);
            cost += static_cast<std::int64_t>(increments[j].size());
        }
        terminal_at.emplace(j, s);
        return s;
    };

    auto settle = [&](int j, int j_cap) {
        while (true) {
            const double s = terminal(j);
            const double h = h0 / std::exp2(j);
            if (std::abs(s - payoff.strike) > c_adapt * std::sqrt(h) || j >= j_cap) return std::pair{s, h};
            ++j;
        }
    };

    Correction c;
    const auto [fine_s, fine_h] = settle(0, level);
    c.fine = payoff(fine_s);
    if (trace) trace->fine_h = fine_h;
    if (level >= 1) {
        const auto [coarse_s, coarse_h] = settle(-1, level - 2);
        c.coarse = payoff(coarse_s);
        if (trace) trace->coarse_h = coarse_h;
    }
    c.cost = static_cast<double>(cost);
    return c;
}

EstimatorKind parse_estimator_kind(std::string_view name) {
    if (name == "standard") return EstimatorKind::standard;
    if (name == "smoothed") return EstimatorKind::smoothed;
    if (name == "cond_exp") return EstimatorKind::cond_exp;
    if (name == "com") return EstimatorKind::com;
    if (name == "split") return EstimatorKind::split;
    if (name == "branch") return EstimatorKind::branch;
    if (name == "adaptive_h") return EstimatorKind::adaptive_h;
    throw InvalidInput("unknown estimator '" + std::string(name) + "'");
}

std::string_view to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::standard: return "standard";
        case EstimatorKind::smoothed: return "smoothed";
        case EstimatorKind::cond_exp: return "cond_exp";
        case EstimatorKind::com: return "com";
        case EstimatorKind::split: return "split";
        case EstimatorKind::branch: return "branch";
        case EstimatorKind::adaptive_h: return "adaptive_h";
    }
    return "?";
}

SplitRule parse_split_rule(std::string_view name) {
    if (name == "sqrt") return SplitRule::sqrt;
    if (name == "linear") return SplitRule::linear;
    throw InvalidInput("unknown m_splits_rule '" + std::string(name) + "'");
}

int splits_for(SplitRule rule, double h_fine) {
    const double m = rule == SplitRule::sqrt ? std::sqrt(1.0 / h_fine) : 1.0 / h_fine;
    // Absorb rounding in 1/h so exact powers of two are not bumped up.
    return std::max(1, static_cast<int>(std::ceil(m - 1e-9)));
}

PathLevelEstimator::PathLevelEstimator(SdeModel model, Payoff payoff, PathEstimatorOptions options)
    : model_(std::move(model)), payoff_(std::move(payoff)), options_(std::move(options)) {
    if (options_.kind == EstimatorKind::smoothed && !options_.kernel) {
        throw InvalidInput("smoothed estimator needs a smoothing kernel");
    }
}

Correction PathLevelEstimator::correction(int level, GaussianStream& stream) const {
    const auto& o = options_;
    switch (o.kind) {
        case EstimatorKind::standard:
            return y_standard(simulate_coupled(model_, level, o.n0_steps, o.scheme, stream), payoff_);
        case EstimatorKind::smoothed:
            return y_smoothed(simulate_coupled(model_, level, o.n0_steps, o.scheme, stream), payoff_, *o.kernel);
        case EstimatorKind::cond_exp:
            return y_conditional_expectation(simulate_coupled(model_, level, o.n0_steps, o.scheme, stream), model_,
                                             payoff_);
        case EstimatorKind::com: {
            const auto state = simulate_coupled(model_, level, o.n0_steps, o.scheme, stream);
            return y_change_of_measure(state, model_, payoff_, stream);
        }
        case EstimatorKind::split: {
            const double hf = model_.maturity / static_cast<double>(static_cast<std::int64_t>(o.n0_steps) << level);
            return y_split_final(model_, payoff_, level, o.n0_steps, o.scheme, splits_for(o.split_rule, hf), stream,
                                 o.split_final_scheme);
        }
        case EstimatorKind::branch:
            return y_branching_split(model_, payoff_, level, o.n0_steps, o.scheme, stream);
        case EstimatorKind::adaptive_h:
            return y_adaptive_timestep(model_, payoff_, level, o.n0_steps, o.scheme, stream, o.c_adapt);
    }
    throw InvalidInput("unknown estimator kind");
}

double PathLevelEstimator::sample(int level, GaussianStream& stream, std::span<double> out) const {
    const Correction c = correction(level, stream);
    out[0] = c.value();
    return c.cost;
}

}  // namespace mlmc
