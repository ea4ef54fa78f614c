#include "doctest.h"

#include "instances.hpp"
#include "rsmdp/oracle.hpp"
#include "rsmdp/spectral.hpp"

#include <algorithm>
#include <cmath>

using namespace rsmdp;
using namespace rsmdp::testing;

namespace {

const Mdp cycle_mdp = make_mdp({Matrix{{0.0, 1.0}}, Matrix{{1.0, 0.0}}}, Matrix{{0.2}, {0.8}});

// Largest real root of det(A - rho I), found by a downward scan from the row-sum bound and bisection.
double perron_by_bisection(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    auto f = [&](double r) { return (a - r * Matrix::Identity(n, n)).determinant(); };
    double hi = a.rowwise().sum().maxCoeff() + 1.0;
    const double sign_hi = f(hi) > 0 ? 1.0 : -1.0;
    const double step = hi / 20000.0;
    double lo = hi - step;
    while (lo > 0 && (f(lo) > 0 ? 1.0 : -1.0) == sign_hi) {
        hi = lo;
        lo -= step;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((f(mid) > 0 ? 1.0 : -1.0) == sign_hi) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("build_kernel examples") {
    const Mdp one = make_mdp({Matrix{{1.0}}}, Matrix{{0.5}});
    CHECK(build_kernel(one, Policy::deterministic({0}, 1), CostTag::Primary).a(0, 0) == doctest::Approx(std::exp(0.5)).epsilon(1e-15));

    const Matrix a = build_kernel(cycle_mdp, Policy::deterministic({0, 0}, 1), CostTag::Primary).a;
    CHECK(a(0, 0) == 0.0);
    CHECK(a(1, 1) == 0.0);
    CHECK(a(0, 1) == doctest::Approx(std::exp(0.2)).epsilon(1e-15));
    CHECK(a(1, 0) == doctest::Approx(std::exp(0.8)).epsilon(1e-15));

    const Mdp two = make_mdp({Matrix{{1.0}, {1.0}}}, Matrix{{0.0, 1.0}});
    const auto k = build_kernel(two, Policy::randomized(Matrix{{0.5, 0.5}}), CostTag::Primary);
    CHECK(k.a(0, 0) == doctest::Approx(0.5 * (1.0 + std::exp(1.0))).epsilon(1e-15));

    CHECK_THROWS_AS(build_kernel(two, Policy::randomized(Matrix{{0.5, 0.5}}), CostTag::Constraint), ValidationError);
}

TEST_CASE("overflow guard keeps logs exact") {
    const Mdp big = make_mdp({Matrix{{0.0, 1.0}}, Matrix{{1.0, 0.0}}}, Matrix{{500.0}, {700.0}});
    const auto k = build_kernel(big, Policy::deterministic({0, 0}, 1), CostTag::Primary);
    CHECK(k.log_scale > 0.0);
    const auto r = evaluate_policy(big, Policy::deterministic({0, 0}, 1), CostTag::Primary);
    CHECK(r.lambda[0] == doctest::Approx(600.0).epsilon(1e-14));
    CHECK(std::isfinite(r.lambda[1]));
}

TEST_CASE("scc_condensation") {
    SUBCASE("identity support gives singletons") {
        const auto c = scc_condensation(Matrix::Identity(4, 4));
        CHECK(c.classes.size() == 4);
    }
    SUBCASE("irreducible chain") {
        const auto c = scc_condensation(Matrix::Constant(3, 3, 0.3));
        REQUIRE(c.classes.size() == 1);
        CHECK(c.classes[0].size() == 3);
    }
    SUBCASE("one-way edge puts the source upstream") {
        const auto c = scc_condensation(Matrix{{0.0, 1.0}, {0.0, 1.0}});
        REQUIRE(c.classes.size() == 2);
        // Reverse topological order: the sink class comes first.
        CHECK(c.classes[0] == std::vector<int>{1});
        CHECK(c.classes[1] == std::vector<int>{0});
        CHECK(c.successors[c.class_of[0]] == std::vector<int>{c.class_of[1]});
    }
}

TEST_CASE("class period") {
    CHECK(class_period(Matrix{{0.0, 1.0}, {1.0, 0.0}}) == 2);
    CHECK(class_period(Matrix{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}}) == 3);
    CHECK(class_period(Matrix{{0.5, 0.5}, {1.0, 0.0}}) == 1);
}

TEST_CASE("perron_root") {
    CHECK(perron_root(Matrix{{2.0}}) == 2.0);
    const Matrix cyc{{0.0, std::exp(0.2)}, {std::exp(0.8), 0.0}};
    CHECK(perron_root(cyc) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int t = 0; t < 20; ++t) {
        Matrix a(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = u(rng);
        CHECK(std::abs(perron_root(a) - perron_by_bisection(a)) <= 1e-9);
    }
}

TEST_CASE("perron_root reports non-convergence") {
    PerronOptions tight;
    tight.max_iter = 2;
    const Matrix a{{0.5, 0.5, 0.1}, {0.2, 0.1, 0.9}, {0.3, 0.8, 0.2}};
    try {
        perron_root(a, tight);
        FAIL("expected PerronError");
    } catch (const PerronError& e) {
        CHECK(e.estimate > 0.0);
    }
}

TEST_CASE("evaluate_policy examples") {
    const auto r = evaluate_policy(cycle_mdp, Policy::deterministic({0, 0}, 1), CostTag::Primary);
    CHECK(r.lambda[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.lambda[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.partition.size() == 1);

    // i.i.d. rows with state-only cost.
    const Vector pi{{0.2, 0.3, 0.5}};
    const Vector c{{0.1, 0.7, 0.4}};
    std::vector<Matrix> p(3, Matrix(1, 3));
    for (auto& row : p) row.row(0) = pi.transpose();
    const Mdp iid = make_mdp(p, c);
    const double expect = std::log((pi.array() * c.array().exp()).sum());
    const auto ri = evaluate_policy(iid, Policy::deterministic({0, 0, 0}, 1), CostTag::Primary);
    for (int i = 0; i < 3; ++i) CHECK(ri.lambda[i] == doctest::Approx(expect).epsilon(1e-12));

    std::mt19937_64 rng(3);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Mdp m = random_dense(3, 2, seed);
        const Policy pol = random_deterministic(3, 2, rng);
        const auto s = evaluate_policy(m, pol, CostTag::Primary);
        const auto g = growth_rate_estimate(m, pol, CostTag::Primary, 4000);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(s.lambda[i] - g.estimate[i]) <= 1e-3);
    }
}

TEST_CASE("transient states take the largest reachable class root") {
    // 0 -> {1 absorbing (cost 0.1), 2 absorbing (cost 0.9)}, own cost 2.0 but transient.
    const Mdp m = make_mdp({Matrix{{0.0, 0.5, 0.5}}, Matrix{{0.0, 1.0, 0.0}}, Matrix{{0.0, 0.0, 1.0}}},
                           Matrix{{2.0}, {0.1}, {0.9}});
    const auto r = evaluate_policy(m, Policy::deterministic({0, 0, 0}, 1), CostTag::Primary);
    CHECK(r.lambda[1] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.lambda[2] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(r.lambda[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(r.partition.size() == 2);
}

TEST_CASE("properties on random instances") {
    std::mt19937_64 rng(11);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int n = 2 + static_cast<int>(seed % 4);
        const Mdp m = seed % 2 ? random_dense(n, 2, seed) : random_sparse(n, 2, seed);
        const Policy pol = seed % 3 ? random_randomized(n, 2, rng) : random_deterministic(n, 2, rng);
        const auto base = evaluate_policy(m, pol, CostTag::Primary);

        Mdp shifted = m;
        shifted.cost.array() += 0.37;
        const auto sh = evaluate_policy(shifted, pol, CostTag::Primary);
        CHECK(((sh.lambda - base.lambda).array() - 0.37).abs().maxCoeff() <= 1e-12);

        Mdp larger = m;
        larger.cost(0, 0) += 0.5;
        const auto lg = evaluate_policy(larger, pol, CostTag::Primary);
        CHECK(((lg.lambda - base.lambda).array() >= -1e-12).all());

        const auto k = build_kernel(m, pol, CostTag::Primary);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (k.a(i, j) > 0.0) CHECK(base.lambda[i] >= base.lambda[j] - 1e-12);

        // Partition cells cover every state once.
        std::vector<int> seen;
        for (const auto& cell : base.partition) {
            CHECK_FALSE(cell.empty());
            seen.insert(seen.end(), cell.begin(), cell.end());
        }
        std::sort(seen.begin(), seen.end());
        CHECK(seen.size() == static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) CHECK(seen[i] == i);

        const int N = 2000;
        const auto g = growth_rate_estimate(m, pol, CostTag::Primary, N);
        for (int i = 0; i < n; ++i) CHECK(std::abs(base.lambda[i] - g.estimate[i]) <= 10.0 / N + 1e-9);
    }
}
