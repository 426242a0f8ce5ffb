#include "mlmc/core.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace mlmc;
using Catch::Approx;

namespace {

// Level l correction 2^-l (1 + Z) with cost 2^l; the telescoping sum is 2.
FunctionEstimator geometric_estimator() {
    return FunctionEstimator([](int l, GaussianStream& s) {
        const double scale = std::exp2(-l);
        return FunctionEstimator::Draw{scale * (1.0 + s.next()), std::exp2(l)};
    });
}

}  // namespace

TEST_CASE("moments match direct formulas") {
    LevelMoments m;
    const std::vector<double> ys = {1.0, 2.0, 4.0, 7.0};
    for (double y : ys) m.add(y, 3.0);
    CHECK(m.n == 4);
    CHECK(m.mean() == Approx(3.5));
    // (1/n) sum (y - 3.5)^2 = (6.25 + 2.25 + 0.25 + 12.25) / 4
    CHECK(m.variance() == Approx(5.25));
    CHECK(m.cost_per_sample() == Approx(3.0));

    LevelMoments a;
    LevelMoments b;
    a.add(1.0, 3.0);
    a.add(2.0, 3.0);
    b.add(4.0, 3.0);
    b.add(7.0, 3.0);
    const LevelMoments c = merge(a, b);
    CHECK(c.n == m.n);
    CHECK(c.s4 == m.s4);
    CHECK(c.cost == m.cost);
}

TEST_CASE("kurtosis of a symmetric two-point sample is one") {
    LevelMoments m;
    for (int i = 0; i < 50; ++i) {
        m.add(0.0, 1.0);
        m.add(1.0, 1.0);
    }
    CHECK(kurtosis(m) == Approx(1.0).epsilon(1e-12));

    // Three-point law {-1, 0, 1} with weights {1/4, 1/2, 1/4}: m4 / m2^2 = 0.5 / 0.25.
    LevelMoments t;
    for (double y : {-1.0, 0.0, 0.0, 1.0}) t.add(y, 1.0);
    CHECK(kurtosis(t) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("kurtosis is undefined for tiny or constant samples") {
    LevelMoments m;
    for (int i = 0; i < 3; ++i) m.add(i, 1.0);
    CHECK_THROWS_AS(kurtosis(m), UndefinedKurtosis);
    LevelMoments c;
    for (int i = 0; i < 10; ++i) c.add(0.25, 1.0);
    CHECK_THROWS_AS(kurtosis(c), UndefinedKurtosis);
}

TEST_CASE("optimal allocation follows the Lagrange formula") {
    const std::vector<double> v1 = {1.0};
    const std::vector<double> c1 = {1.0};
    CHECK(optimal_allocation(v1, c1, 0.1) == std::vector<std::int64_t>{200});

    // sum sqrt(V C) = 2 + 2; N_0 = 200 * 2 * 4, N_1 = 200 * 0.5 * 4.
    const std::vector<double> v2 = {4.0, 1.0};
    const std::vector<double> c2 = {1.0, 4.0};
    CHECK(optimal_allocation(v2, c2, 0.1) == std::vector<std::int64_t>{1600, 400});

    CHECK(optimal_allocation(v2, c2, 0.1, 1000) == std::vector<std::int64_t>{1600, 1000});

    const std::vector<double> zero = {0.0, 1.0};
    CHECK_THROWS_AS(optimal_allocation(v2, zero, 0.1), InvalidInput);
    CHECK_THROWS_AS(optimal_allocation(v2, c2, 0.0), InvalidInput);
    CHECK_THROWS_AS(optimal_allocation(v1, c2, 0.1), InvalidInput);
}

TEST_CASE("rates are recovered exactly from geometric data") {
    std::vector<double> means, vars, costs;
    for (int l = 0; l <= 6; ++l) {
        means.push_back(3.0 * std::exp2(-1.0 * l));
        vars.push_back(0.7 * std::exp2(-2.0 * l));
        costs.push_back(5.0 * std::exp2(1.0 * l));
    }
    const Rates r = fit_rates(means, vars, costs, 2);
    CHECK(r.alpha == Approx(1.0).epsilon(1e-12));
    CHECK(r.beta == Approx(2.0).epsilon(1e-12));
    CHECK(r.gamma == Approx(1.0).epsilon(1e-12));
    CHECK(r.warnings.empty());

    // Entries offset by first_level.
    const std::vector<double> tail(vars.begin() + 2, vars.end());
    CHECK(fit_log2_slope(tail, 2, 2) == Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("fits skip zero entries and need three usable levels") {
    std::vector<double> v = {1.0, 0.5, 0.25, 0.0, 0.0625};
    CHECK(fit_log2_slope(v, 0) == Approx(-1.0).epsilon(1e-12));
    const std::vector<double> few = {1.0, 0.5, 0.0, 0.0};
    CHECK_THROWS_AS(fit_log2_slope(few, 0), InsufficientData);
    const std::vector<double> short_list = {1.0, 0.5, 0.25};
    CHECK_THROWS_AS(fit_log2_slope(short_list, 2), InsufficientData);

    const std::vector<double> m = {1.0, 0.5, 0.25, 0.125, 0.0625};
    const std::vector<double> c = {1.0, 2.0, 4.0, 8.0, 16.0};
    const Rates r = fit_rates(m, v, c, 0);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("level 3") != std::string::npos);
}

TEST_CASE("sampling is independent of threads and batch size") {
    const auto est = geometric_estimator();
    const StreamKey root(11);
    std::vector<LevelMoments> ref(1);
    sample_level(est, 3, 0, 10000, root, ref, 1, 4096);
    for (int threads : {2, 3, 8}) {
        for (std::int64_t batch : {1, 7, 1000, 100000}) {
            std::vector<LevelMoments> m(1);
            sample_level(est, 3, 0, 10000, root, m, threads, batch);
            CHECK(m[0].s1 == ref[0].s1);
            CHECK(m[0].s2 == ref[0].s2);
            CHECK(m[0].s4 == ref[0].s4);
            CHECK(m[0].cost == ref[0].cost);
        }
    }
    // Extending a run by a second block equals one long run.
    std::vector<LevelMoments> split(1);
    sample_level(est, 3, 0, 4000, root, split, 1);
    sample_level(est, 3, 4000, 6000, root, split, 2);
    CHECK(split[0].s1 == Approx(ref[0].s1).epsilon(1e-13));
    CHECK(split[0].n == ref[0].n);
}

TEST_CASE("sample i of level l uses stream derive(derive(root, l), i)") {
    FunctionEstimator est([](int, GaussianStream& s) { return FunctionEstimator::Draw{s.next(), 1.0}; });
    const StreamKey root(3);
    std::vector<LevelMoments> m(1);
    sample_level(est, 2, 5, 1, root, m);
    GaussianStream s(derive(derive(root, 2), 5));
    CHECK(m[0].s1 == s.next());
}

TEST_CASE("driver reaches the requested accuracy on a geometric problem") {
    const auto est = geometric_estimator();
    MlmcConfig cfg;
    cfg.seed = 17;
    cfg.n_warm = 200;
    const double eps = 0.01;
    const MlmcResult res = run_mlmc(est, eps, cfg);
    CHECK(std::abs(res.estimate - 2.0) < 3.0 * eps);
    CHECK(res.std_error < eps / std::sqrt(2.0) * 1.05);
    // Bias 2^-L <= eps / sqrt(2) needs L >= 7.
    CHECK(res.levels.size() >= 8);
    double total = 0.0;
    for (const auto& l : res.levels) total += static_cast<double>(l.n) * l.cost;
    CHECK(res.total_cost == Approx(total));
    double sum = 0.0;
    for (const auto& l : res.levels) sum += l.mean;
    CHECK(res.estimate == Approx(sum));
}

TEST_CASE("driver output does not depend on the thread count") {
    const auto est = geometric_estimator();
    MlmcConfig cfg;
    cfg.seed = 5;
    cfg.n_warm = 100;
    const MlmcResult a = run_mlmc(est, 0.02, cfg);
    cfg.threads = 4;
    cfg.batch = 333;
    const MlmcResult b = run_mlmc(est, 0.02, cfg);
    CHECK(a.estimate == b.estimate);
    CHECK(a.total_cost == b.total_cost);
    REQUIRE(a.levels.size() == b.levels.size());
    for (std::size_t l = 0; l < a.levels.size(); ++l) CHECK(a.levels[l].n == b.levels[l].n);
}

TEST_CASE("driver stops at l_max with the partial result") {
    const auto est = geometric_estimator();
    MlmcConfig cfg;
    cfg.n_warm = 100;
    cfg.l_max = 3;
    try {
        run_mlmc(est, 0.001, cfg);
        FAIL("expected MaxLevelsExceeded");
    } catch (const MaxLevelsExceeded& e) {
        CHECK(e.partial().levels.size() == 4);
    }
}

TEST_CASE("driver rejects bad configuration") {
    const auto est = geometric_estimator();
    MlmcConfig cfg;
    CHECK_THROWS_AS(run_mlmc(est, 0.0, cfg), InvalidInput);
    cfg.l_start = 0;
    CHECK_THROWS_AS(run_mlmc(est, 0.1, cfg), InvalidInput);
    cfg.l_start = 2;
    cfg.n_warm = 0;
    CHECK_THROWS_AS(run_mlmc(est, 0.1, cfg), InvalidInput);
}

TEST_CASE("summary reports undefined kurtosis as NaN") {
    std::vector<LevelMoments> lv(3);
    for (auto& m : lv) {
        for (int i = 0; i < 10; ++i) m.add(1.0, 1.0);
    }
    const MlmcResult r = summarize(lv, 0);
    CHECK(std::isnan(r.levels[0].kurtosis));
    CHECK(r.estimate == Approx(3.0));
}
