#include "doctest.h"

#include "instances.hpp"
#include "rsmdp/dp.hpp"
#include "rsmdp/game_lp.hpp"
#include "rsmdp/oracle.hpp"
#include "rsmdp/spectral.hpp"

#include <cmath>

using namespace rsmdp;
using namespace rsmdp::testing;

namespace {

// Two closed classes and a transient state; actions change costs only, so the game has a pure saddle.
Mdp two_class_shared_kernel(std::uint64_t seed) {
    const Mdp base = two_class(seed, 0.8);
    std::vector<Matrix> p = base.p;
    for (auto& rows : p) rows.row(1) = rows.row(0);
    return make_mdp(p, base.cost);
}

}  // namespace

TEST_CASE("single state picks the cheaper action") {
    const Mdp m = make_mdp({Matrix{{1.0}, {1.0}}}, Matrix{{0.5, 0.2}});
    const auto sol = relative_value_iteration(m, CostTag::Primary);
    CHECK(sol.lambda_star == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(sol.policy.argmax_actions() == std::vector<int>{1});
    CHECK(sol.Lambda[0] == doctest::Approx(std::exp(0.2)).epsilon(1e-12));
}

TEST_CASE("zero costs give zero growth and constant zeta") {
    const Mdp m = random_dense(3, 2, 4, 0.0, 0.0);
    const auto sol = relative_value_iteration(m, CostTag::Primary);
    CHECK(std::abs(sol.lambda_star) <= 1e-12);
    CHECK((sol.zeta.array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("solution invariants") {
    const Mdp m = random_dense(4, 3, 9);
    const auto sol = relative_value_iteration(m, CostTag::Primary, 1e-12);
    CHECK((sol.zeta.array() > 0.0).all());
    CHECK(sol.zeta.maxCoeff() == 1.0);
    CHECK(((sol.Lambda.array() - sol.Psi.array().exp()).abs() <= 1e-12).all());
    CHECK(sol.lambda_star == sol.Psi.maxCoeff());
    CHECK(sol.residual < 10 * 1e-12 + 1e-12);
    CHECK_FALSE(sol.reducible_warning);
}

TEST_CASE("optimal value matches exhaustive enumeration") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const int n = 2 + static_cast<int>(seed % 3);
        const int na = 2 + static_cast<int>(seed % 2);
        const Mdp m = random_dense(n, na, 100 + seed);
        const auto sol = relative_value_iteration(m, CostTag::Primary);
        const auto rep = enumerate_policies(m, CostTag::Primary);
        CHECK(std::abs(sol.lambda_star - rep.lambda_star) <= 1e-6);
    }
}

TEST_CASE("span of successive differences does not grow after burn-in") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto sol = relative_value_iteration(random_dense(4, 2, 200 + seed), CostTag::Primary);
        for (std::size_t k = 11; k < sol.span_history.size(); ++k)
            CHECK(sol.span_history[k] <= sol.span_history[k - 1] * (1.0 + 1e-9) + 1e-15);
    }
}

TEST_CASE("extracted policy is invariant under a cost shift") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Mdp m = random_dense(3, 3, 300 + seed);
        const auto a = relative_value_iteration(m, CostTag::Primary);
        m.cost.array() += 1.25;
        const auto b = relative_value_iteration(m, CostTag::Primary);
        CHECK(a.policy.argmax_actions() == b.policy.argmax_actions());
        CHECK(b.lambda_star - a.lambda_star == doctest::Approx(1.25).epsilon(1e-9));
    }
}

TEST_CASE("non-convergence carries the span history") {
    try {
        relative_value_iteration(random_dense(3, 2, 1), CostTag::Primary, 1e-12, 3);
        FAIL("expected DpConvergenceError");
    } catch (const DpConvergenceError& e) {
        CHECK(e.span_history.size() == 3);
    }
}

TEST_CASE("verify_multichain on a value-iteration solution") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Mdp m = random_dense(3, 2, 400 + seed);
        const auto sol = relative_value_iteration(m, CostTag::Primary);
        CHECK(verify_multichain(m, sol.Psi, sol.V).max_residual < 1e-6);
    }
}

TEST_CASE("a perturbed relative value is flagged") {
    // State 0 has no self-transition, so raising V_0 moves its own right-hand side by nothing.
    std::vector<Matrix> p{Matrix{{0.0, 0.4, 0.6}, {0.0, 0.7, 0.3}}, Matrix{{0.5, 0.2, 0.3}, {0.3, 0.3, 0.4}},
                          Matrix{{0.6, 0.1, 0.3}, {0.2, 0.5, 0.3}}};
    const Mdp m = make_mdp(p, Matrix{{0.3, 0.6}, {0.1, 0.9}, {0.4, 0.2}});
    const auto sol = relative_value_iteration(m, CostTag::Primary);
    Vector V = sol.V;
    V[0] += 0.1;
    const auto rep = verify_multichain(m, sol.Psi, V);
    CHECK(rep.residual_value[0] >= 0.1 - 1e-9);
    CHECK(rep.max_residual >= 0.1 - 1e-9);
    CHECK(rep.worst_state == 0);
}

TEST_CASE("tightening leaves an exact solution alone") {
    const Mdp m = random_dense(3, 2, 402);
    const auto sol = relative_value_iteration(m, CostTag::Primary);
    const Vector V = tighten_relative_values(m, sol.Psi, sol.V);
    CHECK((V - sol.V).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("LP values on two-class instances pass the multichain check") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Mdp m = two_class_shared_kernel(seed);
        const auto sol = solve_with_generation(m, CostTag::Primary);
        // The LP leaves V slack at the transient state; recurrent states are already tight.
        const Vector V = tighten_relative_values(m, sol.beta, sol.V);
        for (int i = 0; i < 4; ++i) CHECK(V[i] == sol.V[i]);
        CHECK(V[4] <= sol.V[4]);
        const auto rep = verify_multichain(m, sol.beta, V);
        CHECK(rep.max_residual < 1e-5);
        const auto cells = partition_by_value(sol.beta, 1e-7);
        CHECK(cells.size() >= 2);
        CHECK(std::abs(sol.beta[0] - sol.beta[2]) > 0.1);
        // Transient state 4 inherits the worse class.
        CHECK(sol.beta[4] == doctest::Approx(std::max(sol.beta[0], sol.beta[2])).epsilon(1e-7));
        CHECK(std::abs(sol.lambda_star() - enumerate_policies(m, CostTag::Primary).lambda_star) <= 1e-4);
    }
}
