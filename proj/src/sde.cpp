#include "mlmc/sde.hpp"

#include "mlmc/errors.hpp"

#include <cmath>
#include <string>

namespace mlmc {

SdeModel gbm(double r, double sigma, double s0, double maturity) {
    if (!(maturity > 0.0)) throw InvalidInput("gbm: maturity must be > 0");
    SdeModel m;
    m.drift = [r](double s) { return r * s; };
    m.diffusion = [sigma](double s) { return sigma * s; };
    m.diffusion_derivative = [sigma](double) { return sigma; };
    m.s0 = s0;
    m.maturity = maturity;
    return m;
}

Scheme parse_scheme(std::string_view name) {
    if (name == "euler") return Scheme::euler;
    if (name == "milstein") return Scheme::milstein;
    throw InvalidInput("unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(Scheme scheme) { return scheme == Scheme::euler ? "euler" : "milstein"; }

double step(const SdeModel& model, double s, double dw, double h, Scheme scheme) {
    const double b = model.diffusion(s);
    double next = s + model.drift(s) * h + b * dw;
    if (scheme == Scheme::milstein) next += 0.5 * b * model.diffusion_derivative(s) * (dw * dw - h);
    return next;
}

CoupledPathState simulate_coupled(const SdeModel& model, int level, int n0_steps, Scheme scheme,
                                  GaussianStream& stream) {
    if (level < 0) throw InvalidInput("simulate_coupled: level must be >= 0");
    if (n0_steps < 1) throw InvalidInput("simulate_coupled: n0_steps must be >= 1");

    CoupledPathState st;
    st.level = level;
    const std::int64_t nf = static_cast<std::int64_t>(n0_steps) << level;
    st.h_fine = model.maturity / static_cast<double>(nf);
    st.cost = nf;
    const double sqrt_hf = std::sqrt(st.h_fine);

    if (level == 0) {
        double s = model.s0;
        for (std::int64_t k = 0; k < nf; ++k) {
            const double dw = sqrt_hf * stream.next();
            if (k == nf - 2) st.dw_second_last = dw;
            if (k == nf - 1) {
                st.fine_penultimate = s;
                st.dw_last = dw;
            }
            s = step(model, s, dw, st.h_fine, scheme);
        }
        st.fine_terminal = s;
        return st;
    }

    st.has_coarse = true;
    st.h_coarse = 2.0 * st.h_fine;
    const std::int64_t nc = nf / 2;
    double sf = model.s0;
    double sc = model.s0;
    for (std::int64_t k = 0; k < nc; ++k) {
        const double dw1 = sqrt_hf * stream.next();
        const double dw2 = sqrt_hf * stream.next();
        const bool last = k == nc - 1;
        if (last) {
            st.coarse_penultimate = sc;
            st.dw_second_last = dw1;
            st.dw_last = dw2;
        }
        sf = step(model, sf, dw1, st.h_fine, scheme);
        if (last) st.fine_penultimate = sf;
        sf = step(model, sf, dw2, st.h_fine, scheme);
        sc = step(model, sc, dw1 + dw2, st.h_coarse, scheme);
    }
    st.fine_terminal = sf;
    st.coarse_terminal = sc;
    return st;
}

CoupledPair advance_coupled(const SdeModel& model, CoupledPair state, std::int64_t coarse_steps, double h_fine,
                            Scheme scheme, GaussianStream& stream) {
    const double sqrt_hf = std::sqrt(h_fine);
    for (std::int64_t k = 0; k < coarse_steps; ++k) {
        const double dw1 = sqrt_hf * stream.next();
        const double dw2 = sqrt_hf * stream.next();
        state.fine = step(model, state.fine, dw1, h_fine, scheme);
        state.fine = step(model, state.fine, dw2, h_fine, scheme);
        state.coarse = step(model, state.coarse, dw1 + dw2, 2.0 * h_fine, scheme);
    }
    return state;
}

double simulate_on_increments(const SdeModel& model, Scheme scheme, double h, const std::vector<double>& increments) {
    double s = model.s0;
    for (double dw : increments) s = step(model, s, dw, h, scheme);
    return s;
}

StoredPath simulate_stored(const SdeModel& model, Scheme scheme, std::int64_t steps, GaussianStream& stream) {
    if (steps < 1) throw InvalidInput("simulate_stored: steps must be >= 1");
    StoredPath p;
    p.h = model.maturity / static_cast<double>(steps);
    const double sqrt_h = std::sqrt(p.h);
    p.increments.resize(static_cast<std::size_t>(steps));
    for (auto& dw : p.increments) dw = sqrt_h * stream.next();
    p.terminal = simulate_on_increments(model, scheme, p.h, p.increments);
    p.cost = steps;
    return p;
}

int refinement_halvings(double h, double target_h) {
    if (!(h > 0.0) || !(target_h > 0.0)) throw InvalidRefinement("refinement: step sizes must be > 0");
    const double ratio = h / target_h;
    const double k = std::round(std::log2(ratio));
    if (k < 0.0 || std::abs(ratio - std::exp2(k)) > 1e-9 * std::exp2(k)) {
        throw InvalidRefinement("refinement: target_h must be h / 2^k");
    }
    return static_cast<int>(k);
}

std::vector<double> bridge_refine(const std::vector<double>& increments, double h, int halvings,
                                  GaussianStream& stream) {
    std::vector<double> current = increments;
    for (int k = 0; k < halvings; ++k) {
        std::vector<double> finer;
        finer.reserve(2 * current.size());
        for (double dw : current) {
            const double mid = brownian_bridge_midpoint(0.0, dw, 0.0, h, stream.next());
            finer.push_back(mid);
            finer.push_back(dw - mid);
        }
        current = std::move(finer);
        h *= 0.5;
    }
    return current;
}

StoredPath refine_path(const SdeModel& model, Scheme scheme, const StoredPath& path, double target_h,
                       GaussianStream& stream) {
    const int halvings = refinement_halvings(path.h, target_h);
    if (halvings == 0) return path;
    StoredPath out;
    out.increments = bridge_refine(path.increments, path.h, halvings, stream);
    out.h = path.h / std::exp2(halvings);
    out.terminal = simulate_on_increments(model, scheme, out.h, out.increments);
    out.cost = path.cost + static_cast<std::int64_t>(out.increments.size());
    return out;
}

}  // namespace mlmc
