#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "morl/oracle.hpp"
#include "morl/rng.hpp"

using namespace morl;

TEST_CASE("central differences are exact on quadratics") {
    auto quad = [](std::span<const double> t) { return t[0] * t[0] + t[0] * t[1]; };
    std::vector<double> theta{1.0, 2.0};
    auto g = oracle::finite_diff(quad, theta);
    CHECK(std::abs(g[0] - 4.0) <= 1e-8);  // 2*1 + 2
    CHECK(std::abs(g[1] - 1.0) <= 1e-8);

    // Degree <= 2 polynomials are exact to rounding.
    auto poly = [](std::span<const double> t) {
        return 3.0 * t[0] * t[0] - 2.0 * t[0] * t[1] + 0.5 * t[1] * t[1] + t[0] - 4.0;
    };
    std::vector<double> p{0.3, -1.7};
    auto gp = oracle::finite_diff(poly, p);
    CHECK(std::abs(gp[0] - (6.0 * p[0] - 2.0 * p[1] + 1.0)) <= 1e-9);
    CHECK(std::abs(gp[1] - (-2.0 * p[0] + p[1])) <= 1e-9);
}

TEST_CASE("finite differences of a constant vanish") {
    auto g = oracle::finite_diff([](std::span<const double>) { return 42.0; },
                                 std::vector<double>{1.0, 2.0, 3.0});
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("gradient comparison reports the worst relative error") {
    std::vector<double> a{1.0, 2.0, 0.0};
    std::vector<double> b{1.0, 2.2, 0.0};
    auto report = oracle::compare_gradients(a, b, 1e-5);
    CHECK(report.argmax == 1);
    CHECK(report.max_rel_error == doctest::Approx(0.2 / 2.2));

    auto equal = oracle::compare_gradients(a, a, 1e-5);
    CHECK(equal.max_rel_error == 0.0);
}

TEST_CASE("invariance probe recovers the closed form of a pure quadratic") {
    // L(theta) = 0.5 theta.theta at theta = (1, 0): grad = theta; any unit u
    // orthogonal to theta gives |dL| = 0.5 eta^2 exactly.
    auto loss = [](std::span<const double> t) {
        return 0.5 * (t[0] * t[0] + t[1] * t[1]);
    };
    std::vector<double> theta{1.0, 0.0};
    std::vector<double> u{0.0, 1.0};
    std::vector<double> etas{1e-2, 1e-3, 1e-4};
    auto deltas = oracle::first_order_invariance_probe(loss, theta, u, etas);
    for (std::size_t i = 0; i < etas.size(); ++i)
        CHECK(deltas[i] == doctest::Approx(0.5 * etas[i] * etas[i]).epsilon(1e-9));

    // Parallel probe: first-order term dominates, ratio ~ 10 per eta decade.
    std::vector<double> par{1.0, 0.0};
    auto lin = oracle::first_order_invariance_probe(loss, theta, par, etas);
    CHECK(lin[0] / lin[1] == doctest::Approx(10.0).epsilon(0.05));

    // Requires a unit direction.
    CHECK_THROWS(oracle::first_order_invariance_probe(loss, theta,
                                                      std::vector<double>{2.0, 0.0}, etas));
}

TEST_CASE("brute-force projection handles the degenerate alignments") {
    // Orthogonal input comes back unchanged (to grid pitch).
    auto v = oracle::projection_bruteforce(std::vector<double>{0.0, 2.0},
                                           std::vector<double>{1.0, 0.0});
    CHECK(std::abs(v[0]) <= 3e-3);
    CHECK(std::abs(v[1] - 2.0) <= 3e-3);

    // Parallel input collapses to approximately zero.
    v = oracle::projection_bruteforce(std::vector<double>{3.0, 0.0},
                                      std::vector<double>{1.0, 0.0});
    CHECK(std::abs(v[0]) <= 5e-3);
    CHECK(std::abs(v[1]) <= 5e-3);

    CHECK_THROWS(oracle::projection_bruteforce(std::vector<double>{1, 2, 3, 4},
                                               std::vector<double>{1, 2, 3, 4}));
}

TEST_CASE("brute force agrees with the closed form on random 2-D and 3-D pairs") {
    Rng rng(55);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t dim = 2 + rng.index(2);
        std::vector<double> g_r = rng.normal_vec(dim), g_e = rng.normal_vec(dim);
        auto bf = oracle::projection_bruteforce(g_e, g_r, 400);

        // Closed form recomputed inline (independent of the combine module).
        double rr = 0.0, re = 0.0, en = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            rr += g_r[i] * g_r[i];
            re += g_r[i] * g_e[i];
            en += g_e[i] * g_e[i];
        }
        const double pitch = 2.0 * std::sqrt(en) / 400.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double closed = g_e[i] - re / rr * g_r[i];
            CHECK(std::abs(bf[i] - closed) <= dim * pitch);
        }
    }
}
