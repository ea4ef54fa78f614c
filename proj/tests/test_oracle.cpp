#include "doctest.h"

#include "instances.hpp"
#include "rsmdp/oracle.hpp"
#include "rsmdp/spectral.hpp"

#include <cmath>

using namespace rsmdp;
using namespace rsmdp::testing;

namespace {

const Mdp cycle = make_mdp({Matrix{{0.0, 1.0}}, Matrix{{1.0, 0.0}}}, Matrix{{0.2}, {0.8}});
const Policy stay = Policy::deterministic({0, 0}, 1);
const Mdp bench = make_mdp({Matrix{{1.0}, {1.0}}}, Matrix{{0.0, 1.0}}, Matrix{{1.0, 0.0}}, 0.5);

Mdp iid_chain() {
    const Vector pi{{0.2, 0.3, 0.5}};
    std::vector<Matrix> p(3, Matrix(1, 3));
    for (auto& row : p) row.row(0) = pi.transpose();
    return make_mdp(p, Matrix{{0.1}, {0.7}, {0.4}});
}

}  // namespace

TEST_CASE("finite-horizon examples") {
    const Mdp one = make_mdp({Matrix{{1.0}}}, Matrix{{0.5}});
    CHECK(finite_horizon_value(one, Policy::deterministic({0}, 1), CostTag::Primary, 1)[0] == doctest::Approx(0.5));
    const Vector v = finite_horizon_value(cycle, stay, CostTag::Primary, 2);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(finite_horizon_value(one, Policy::deterministic({0}, 1), CostTag::Primary, 0), ValidationError);
}

TEST_CASE("finite-horizon values are submultiplicative") {
    std::mt19937_64 rng(1);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Mdp m = random_dense(3, 2, seed);
        const Policy pol = random_randomized(3, 2, rng);
        const int N = 7, M = 5;
        const Vector a = finite_horizon_value(m, pol, CostTag::Primary, N);
        const Vector b = finite_horizon_value(m, pol, CostTag::Primary, M);
        const Vector c = finite_horizon_value(m, pol, CostTag::Primary, N + M);
        CHECK(((c.array() - a.array() - b.maxCoeff() - std::log(3.0)) <= 1e-12).all());
        CHECK(((c.array() - a.array() - b.maxCoeff()) <= 1e-12).all());
    }
}

TEST_CASE("finite-horizon recursion does not overflow") {
    const Mdp hot = make_mdp({Matrix{{0.5, 0.5}}, Matrix{{0.5, 0.5}}}, Matrix{{700.0}, {-700.0}});
    const Vector v = finite_horizon_value(hot, stay, CostTag::Primary, 1000);
    CHECK(v.allFinite());
}

TEST_CASE("growth estimates") {
    const auto g = growth_rate_estimate(cycle, stay, CostTag::Primary, 1000);
    CHECK(std::abs(g.estimate[0] - 0.5) <= 1e-3);
    CHECK(std::abs(g.tail_slope[1] - 0.5) <= 1e-3);

    const Mdp iid = iid_chain();
    const double exact = std::log(0.2 * std::exp(0.1) + 0.3 * std::exp(0.7) + 0.5 * std::exp(0.4));
    for (int N : {100, 357, 1000}) {
        const auto e = growth_rate_estimate(iid, Policy::deterministic({0, 0, 0}, 1), CostTag::Primary, N);
        // The first stage pays c(i) itself, so value(N) = c_i + (N - 1) L and only the slope is exact.
        CHECK((e.tail_slope.array() - exact).abs().maxCoeff() <= 1e-9);
        const Vector c{{0.1, 0.7, 0.4}};
        CHECK((e.estimate.array() - (c.array() + (N - 1) * exact) / N).abs().maxCoeff() <= 1e-9);
    }
    CHECK_THROWS_AS(growth_rate_estimate(cycle, stay, CostTag::Primary, 99), ValidationError);

    std::mt19937_64 rng(2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Mdp m = random_dense(4, 2, 20 + seed);
        const Policy pol = random_deterministic(4, 2, rng);
        const int N = 1000;
        const auto e = growth_rate_estimate(m, pol, CostTag::Primary, N);
        const auto s = evaluate_policy(m, pol, CostTag::Primary);
        CHECK((e.estimate - s.lambda).cwiseAbs().maxCoeff() <= 10.0 / N + 1e-9);
    }
}

TEST_CASE("oracle growth rates agree with the spectral evaluator") {
    std::mt19937_64 rng(3);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Mdp m = seed % 2 ? random_dense(4, 3, seed) : random_sparse(5, 2, seed);
        const Policy pol = random_randomized(m.n_states, m.n_actions, rng);
        const Vector o = oracle_growth_rates(m, pol, CostTag::Primary);
        const Vector s = evaluate_policy(m, pol, CostTag::Primary).lambda;
        CHECK((o - s).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("enumeration") {
    const Mdp single = make_mdp({Matrix{{1.0}, {1.0}}}, Matrix{{0.5, 0.2}});
    const auto r = enumerate_policies(single, CostTag::Primary);
    CHECK(r.n_policies == 2);
    CHECK(r.lambda_star == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.argmin[0] == 1);

    Mdp flat = random_dense(3, 3, 4);
    flat.cost.setConstant(0.37);
    const auto f = enumerate_policies(flat, CostTag::Primary);
    CHECK(f.n_policies == 27);
    CHECK(f.table.rows() == 27);
    CHECK(f.lambda_star == doctest::Approx(0.37).epsilon(1e-12));

    const Mdp m = random_dense(2, 2, 5);
    const auto a = enumerate_policies(m, CostTag::Primary);
    const auto b = enumerate_policies(m, CostTag::Primary);
    CHECK((a.table.array() == b.table.array()).all());
    CHECK(a.lambda_star == b.lambda_star);

    CHECK(decode_policy(5, 3, 2) == std::vector<int>{1, 0, 1});

    std::vector<Matrix> p(7, Matrix::Constant(10, 7, 1.0 / 7.0));
    const Mdp big = make_mdp(p, Matrix::Zero(7, 10));
    CHECK_THROWS_AS(enumerate_policies(big, CostTag::Primary), GuardError);
}

TEST_CASE("Monte Carlo") {
    const auto det = monte_carlo_cost(cycle, stay, CostTag::Primary, 0, 10, 50, 1);
    CHECK(det.estimate == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(det.half_width == 0.0);

    const Mdp m = random_dense(3, 2, 6);
    std::mt19937_64 rng(6);
    const Policy pol = random_randomized(3, 2, rng);
    const auto a = monte_carlo_cost(m, pol, CostTag::Primary, 1, 20, 500, 42);
    const auto b = monte_carlo_cost(m, pol, CostTag::Primary, 1, 20, 500, 42);
    CHECK(a.estimate == b.estimate);
    CHECK(a.half_width == b.half_width);

    const int N = 20;
    const double exact = finite_horizon_value(m, pol, CostTag::Primary, N)[1] / N;
    int covered = 0;
    const int trials = 40;
    double hw_small = 0.0, hw_large = 0.0;
    for (int s = 0; s < trials; ++s) {
        const auto e = monte_carlo_cost(m, pol, CostTag::Primary, 1, N, 1000, 1000 + s);
        if (std::abs(e.estimate - exact) <= 3.0 * e.half_width) ++covered;
        hw_small += e.half_width;
        hw_large += monte_carlo_cost(m, pol, CostTag::Primary, 1, N, 4000, 5000 + s).half_width;
    }
    CHECK(covered >= 0.95 * trials);
    CHECK(hw_large / hw_small == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("grid search") {
    CHECK(grid_size(1, 2, 1000) == 1001);
    CHECK(grid_size(2, 3, 10) == 66 * 66);
    CHECK(grid_size(3, 3, 1000) == -1);

    const GridResult g = constrained_grid_search(bench, 1000);
    REQUIRE(g.feasible);
    CHECK(g.objective == doctest::Approx(0.72734).epsilon(1e-3));
    CHECK(g.y(0, 0) == doctest::Approx(0.378).epsilon(1e-3));
    CHECK(g.constraint_lambda[0] <= 0.5);

    // Independent check of the winner by the finite-horizon recursion.
    const Policy w = Policy::randomized(g.y);
    CHECK(std::abs(growth_rate_estimate(bench, w, CostTag::Primary, 1000).estimate[0] - g.cost_lambda[0]) <= 1e-2);

    Mdp loose = bench;
    loose.bound = 100.0;
    const GridResult u = constrained_grid_search(loose, 100);
    CHECK(u.objective == doctest::Approx(0.0).epsilon(1e-12));

    Mdp tight = bench;
    tight.bound = -0.1;
    const GridResult t = constrained_grid_search(tight, 100);
    CHECK_FALSE(t.feasible);
    CHECK(t.n_feasible == 0);

    std::vector<Matrix> p(3, Matrix::Constant(3, 3, 1.0 / 3.0));
    const Mdp big = make_mdp(p, Matrix::Zero(3, 3), Matrix::Zero(3, 3), 0.0);
    CHECK_THROWS_AS(constrained_grid_search(big, 1000), GuardError);
}
