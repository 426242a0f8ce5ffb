#include "mlmc/errors.hpp"
#include "mlmc/random.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

using namespace mlmc;
using Catch::Approx;

TEST_CASE("philox matches the Random123 known-answer vector for zero key and counter") {
    // Reference output block 6627e8d5 e169c58d bc57ac4c 9b00dbd8; first two words.
    CHECK(philox_bits(0, 0) == 0xE169C58D6627E8D5ULL);
}

TEST_CASE("equal keys give equal streams, different paths give different ones") {
    const StreamKey a(42, {1, 2});
    const StreamKey b(42, {1, 2});
    const StreamKey c(42, {2, 1});
    const StreamKey d(43, {1, 2});
    CHECK(a == b);
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != c.digest());
    CHECK(a.digest() != d.digest());
    CHECK(derive(derive(StreamKey(42), 1), 2).digest() == a.digest());
    CHECK(derive(StreamKey(42), 1).path() == std::vector<std::uint64_t>{1});

    GaussianStream s1(a);
    GaussianStream s2(b);
    for (int i = 0; i < 100; ++i) CHECK(s1.next() == s2.next());
}

TEST_CASE("draw c is a pure function of key and counter") {
    GaussianStream s(StreamKey(7));
    const double z0 = s.next();
    const double z1 = s.next();
    const double z2 = s.next();
    CHECK(s.counter() == 3);
    GaussianStream t(StreamKey(7), 1);
    CHECK(t.next() == z1);
    CHECK(t.next() == z2);
    CHECK(s.normal_at(0) == z0);
}

TEST_CASE("normal draws have zero mean, unit variance and no lag correlation") {
    GaussianStream s(StreamKey(2024));
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0, s4 = 0.0, lag = 0.0, prev = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = s.next();
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
        if (i > 0) lag += z * prev;
        prev = z;
    }
    // 5 standard errors.
    CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
    CHECK(std::abs(lag / n) < 5.0 / std::sqrt(n));
}

TEST_CASE("sibling streams are uncorrelated") {
    const StreamKey root(9);
    GaussianStream a(derive(root, 0));
    GaussianStream b(derive(root, 1));
    const int n = 100000;
    double sab = 0.0;
    for (int i = 0; i < n; ++i) sab += a.next() * b.next();
    CHECK(std::abs(sab / n) < 5.0 / std::sqrt(n));
}

TEST_CASE("uniforms stay inside the open unit interval") {
    GaussianStream s(StreamKey(0));
    std::set<std::uint64_t> seen;
    for (std::uint64_t c = 0; c < 10000; ++c) {
        const double u = s.uniform_at(c);
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        seen.insert(philox_bits(0, c));
    }
    CHECK(seen.size() == 10000);
}

TEST_CASE("normal cdf, pdf and quantile agree with erfc and with each other") {
    for (double x : {-6.0, -2.5, -1.0, -0.1, 0.0, 0.15, 0.7, 1.96, 4.0}) {
        CHECK(normal_cdf(x) == Approx(0.5 * std::erfc(-x / std::sqrt(2.0))).epsilon(1e-14));
        CHECK(normal_pdf(x) == Approx(std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
        CHECK(normal_quantile(normal_cdf(x)) == Approx(x).margin(1e-12));
    }
    CHECK(normal_cdf(0.15) == Approx(0.559618).margin(5e-7));
    CHECK(normal_quantile(0.975) == Approx(1.959963984540054).epsilon(1e-14));
    CHECK_THROWS_AS(normal_quantile(0.0), InvalidInput);
    CHECK_THROWS_AS(normal_quantile(1.0), InvalidInput);
}

TEST_CASE("bridge midpoint has the conditional mean and variance") {
    CHECK(brownian_bridge_midpoint(1.0, 3.0, 0.0, 1.0, 0.0) == 2.0);
    CHECK(brownian_bridge_midpoint(0.0, 0.0, 0.5, 1.5, 1.0) == Approx(0.5));

    GaussianStream s(StreamKey(5));
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = brownian_bridge_midpoint(0.0, 0.0, 0.0, 1.0, s.next());
        s1 += w;
        s2 += w * w;
    }
    CHECK(std::abs(s1 / n) < 0.005);
    CHECK(s2 / n == Approx(0.25).margin(0.005));

    CHECK_THROWS_AS(brownian_bridge_midpoint(0.0, 0.0, 1.0, 1.0, 0.0), InvalidInterval);
    CHECK_THROWS_AS(brownian_bridge_midpoint(0.0, 0.0, 2.0, 1.0, 0.0), InvalidInterval);
}
