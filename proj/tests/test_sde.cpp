#include "mlmc/errors.hpp"
#include "mlmc/sde.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace mlmc;
using Catch::Approx;

namespace {

const SdeModel kGbm = gbm(0.05, 0.2, 1.0, 1.0);

// Exact GBM terminal value for Brownian endpoint w.
double gbm_exact(double w) { return std::exp((0.05 - 0.5 * 0.04) + 0.2 * w); }

}  // namespace

TEST_CASE("single steps match hand computation") {
    CHECK(step(kGbm, 1.0, 0.1, 0.01, Scheme::euler) == Approx(1.0 + 0.0005 + 0.02));
    CHECK(step(kGbm, 1.0, 0.0, 0.01, Scheme::milstein) == Approx(1.0003).epsilon(1e-14));
    // 1 + 0.0005 + 0.02 + 0.5 * 0.04 * (0.01 - 0.01)
    CHECK(step(kGbm, 1.0, 0.1, 0.01, Scheme::milstein) == Approx(1.0205).epsilon(1e-14));
}

TEST_CASE("scheme names round-trip") {
    CHECK(parse_scheme("euler") == Scheme::euler);
    CHECK(parse_scheme("milstein") == Scheme::milstein);
    CHECK(to_string(Scheme::milstein) == "milstein");
    CHECK_THROWS_AS(parse_scheme("rk4"), InvalidInput);
    CHECK_THROWS_AS(gbm(0.05, 0.2, 1.0, 0.0), InvalidInput);
}

TEST_CASE("coarse path is driven by pairwise sums of fine increments") {
    for (Scheme scheme : {Scheme::euler, Scheme::milstein}) {
        GaussianStream s(StreamKey(1, {2}));
        const auto st = simulate_coupled(kGbm, 3, 2, scheme, s);
        CHECK(st.cost == 16);
        CHECK(st.h_fine == Approx(1.0 / 16));
        CHECK(st.h_coarse == Approx(1.0 / 8));

        GaussianStream r(StreamKey(1, {2}));
        std::vector<double> fine;
        std::vector<double> coarse;
        for (int k = 0; k < 8; ++k) {
            const double a = 0.25 * r.next();
            const double b = 0.25 * r.next();
            fine.push_back(a);
            fine.push_back(b);
            coarse.push_back(a + b);
        }
        CHECK(st.fine_terminal == simulate_on_increments(kGbm, scheme, 1.0 / 16, fine));
        CHECK(st.coarse_terminal == simulate_on_increments(kGbm, scheme, 1.0 / 8, coarse));
        CHECK(st.dw_last == fine[15]);
        CHECK(st.dw_second_last == fine[14]);
        CHECK(step(kGbm, st.fine_penultimate, st.dw_last, st.h_fine, scheme) == st.fine_terminal);
        CHECK(step(kGbm, st.coarse_penultimate, fine[14] + fine[15], st.h_coarse, scheme) == st.coarse_terminal);
    }
}

TEST_CASE("level 0 has no coarse path") {
    GaussianStream s(StreamKey(4));
    const auto st = simulate_coupled(kGbm, 0, 1, Scheme::euler, s);
    CHECK_FALSE(st.has_coarse);
    CHECK(st.cost == 1);
    CHECK(st.fine_penultimate == 1.0);
    CHECK(st.fine_terminal == step(kGbm, 1.0, st.dw_last, 1.0, Scheme::euler));
}

TEST_CASE("advance_coupled draws the same increments as simulate_coupled") {
    GaussianStream a(StreamKey(8));
    GaussianStream b(StreamKey(8));
    const auto st = simulate_coupled(kGbm, 4, 1, Scheme::milstein, a);
    const auto pair = advance_coupled(kGbm, {1.0, 1.0}, 8, 1.0 / 16, Scheme::milstein, b);
    CHECK(pair.fine == st.fine_terminal);
    CHECK(pair.coarse == st.coarse_terminal);
}

TEST_CASE("strong error decays at order 1/2 for Euler and 1 for Milstein") {
    auto rms_error = [](Scheme scheme, int steps) {
        double sum = 0.0;
        const int n = 4000;
        for (int i = 0; i < n; ++i) {
            GaussianStream s(StreamKey(99, {static_cast<std::uint64_t>(i)}));
            const auto p = simulate_stored(kGbm, scheme, steps, s);
            double w = 0.0;
            for (double dw : p.increments) w += dw;
            const double e = p.terminal - gbm_exact(w);
            sum += e * e;
        }
        return std::sqrt(sum / n);
    };
    const double e_ratio = rms_error(Scheme::euler, 16) / rms_error(Scheme::euler, 64);
    const double m_ratio = rms_error(Scheme::milstein, 16) / rms_error(Scheme::milstein, 64);
    // Four times more steps: error ratios near 2 and 4.
    CHECK(std::log2(e_ratio) / 2.0 == Approx(0.5).margin(0.1));
    CHECK(std::log2(m_ratio) / 2.0 == Approx(1.0).margin(0.1));
}

TEST_CASE("bridge refinement preserves interval sums and has bridge variance") {
    GaussianStream s(StreamKey(12));
    const std::vector<double> inc = {0.3, -0.2, 0.05};
    const auto fine = bridge_refine(inc, 0.25, 3, s);
    REQUIRE(fine.size() == 24);
    for (std::size_t i = 0; i < inc.size(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 8; ++k) sum += fine[8 * i + k];
        CHECK(sum == Approx(inc[i]).margin(1e-15));
    }

    // First half of a zero-sum increment over h = 1 has variance 1/4.
    const int n = 50000;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        GaussianStream t(StreamKey(13, {static_cast<std::uint64_t>(i)}));
        const auto half = bridge_refine({0.0}, 1.0, 1, t);
        s2 += half[0] * half[0];
    }
    CHECK(s2 / n == Approx(0.25).margin(0.005));
}

TEST_CASE("refined paths have the fine-grid law and accumulate cost") {
    GaussianStream s(StreamKey(21));
    const auto p = simulate_stored(kGbm, Scheme::euler, 4, s);
    CHECK(p.cost == 4);
    const auto q = refine_path(kGbm, Scheme::euler, p, 1.0 / 16, s);
    CHECK(q.increments.size() == 16);
    CHECK(q.cost == 20);
    CHECK(q.h == Approx(1.0 / 16));
    CHECK(q.terminal == simulate_on_increments(kGbm, Scheme::euler, q.h, q.increments));
    const auto same = refine_path(kGbm, Scheme::euler, p, 0.25, s);
    CHECK(same.terminal == p.terminal);

    CHECK(refinement_halvings(0.25, 0.25 / 8) == 3);
    CHECK_THROWS_AS(refinement_halvings(0.25, 0.1), InvalidRefinement);
    CHECK_THROWS_AS(refinement_halvings(0.25, 0.5), InvalidRefinement);
    CHECK_THROWS_AS(refinement_halvings(0.25, 0.0), InvalidRefinement);
}
