#include "doctest.h"

#include "instances.hpp"
#include "rsmdp/constrained.hpp"
#include "rsmdp/oracle.hpp"
#include "rsmdp/spectral.hpp"

#include <cmath>
#include <sstream>

using namespace rsmdp;
using namespace rsmdp::testing;

namespace {

const Mdp bench = make_mdp({Matrix{{1.0}, {1.0}}}, Matrix{{0.0, 1.0}}, Matrix{{1.0, 0.0}}, 0.5);

// y1 is the weight on the first action (cost 0, constraint cost 1); the cost log(e - (e - 1) y1)
// is evaluated where the constraint log(1 + (e - 1) y1) <= 0.5 binds.
const double kBenchY1 = (std::exp(0.5) - 1.0) / (std::exp(1.0) - 1.0);
const double kBenchCost = std::log(std::exp(1.0) - (std::exp(1.0) - 1.0) * kBenchY1);

}  // namespace

TEST_CASE("benchmark closed form") {
    CHECK(kBenchY1 == doctest::Approx(0.37754).epsilon(1e-5));
    CHECK(kBenchCost == doctest::Approx(0.72734).epsilon(1e-5));
}

TEST_CASE("projected step") {
    CHECK(projected_step(1.0, 0.1, -0.3) == doctest::Approx(0.97).epsilon(1e-15));
    CHECK(projected_step(0.02, 0.1, -0.5) == 0.0);
    CHECK(projected_step(0.0, 0.5, 0.4) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("product chain") {
    const Mdp m = random_dense(2, 2, 7, 0.0, 1.0, 0.5);
    const ProductChain pc = product_chain(m, 1.5);
    REQUIRE(pc.mdp.n_states == 4);
    const Matrix& k = *m.constraint_cost;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int u = 0; u < 2; ++u) {
                CHECK(std::abs(pc.mdp.cost(pc.index(i, j), u) - (m.cost(i, u) + 1.5 * k(j, u))) <= 1e-12);
                CHECK(std::abs(pc.mdp.p[pc.index(i, j)].row(u).sum() - 1.0) <= 1e-12);
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        CHECK(pc.mdp.p[pc.index(i, j)](u, pc.index(a, b)) ==
                              doctest::Approx(m.p[i](u, a) * m.p[j](u, b)).epsilon(1e-15));
            }
    const ProductChain flat = product_chain(m, 0.0);
    for (int i = 0; i < 2; ++i)
        for (int u = 0; u < 2; ++u) CHECK(flat.mdp.cost(flat.index(i, 0), u) == flat.mdp.cost(flat.index(i, 1), u));
    CHECK_THROWS_AS(product_chain(random_dense(2, 2, 1), 1.0), ValidationError);
}

TEST_CASE("combine_values") {
    const Vector b{{1.0, 2.0}}, v{{0.5, -0.5}}, bk{{3.0, 4.0}}, vk{{0.0, 1.0}};
    const auto c = combine_values(b, v, bk, vk, 0.5);
    CHECK(c.beta[1] == doctest::Approx(1.0 + 0.5 * 4.0));
    CHECK(c.V[2] == doctest::Approx(-0.5 + 0.5 * 0.0));
    const auto z = combine_values(b, v, bk, vk, 0.0);
    CHECK(z.beta[0] == 1.0);
    CHECK(z.beta[1] == 1.0);
}

TEST_CASE("gamma = 0 reduces to the unconstrained program") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Mdp m = random_dense(3, 2, 10 + seed, 0.0, 1.0, 0.5);
        const GameSolution u = solve_with_generation(m, CostTag::Primary);
        const PsiResult r = psi_of_gamma(m, 0.0);
        CHECK((r.solution.beta - u.beta).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(r.psi == doctest::Approx(u.beta.sum()).epsilon(1e-10));
        const ProductCheck pc = check_product(m, r.solution);
        CHECK(std::abs(pc.product_optimum - 3.0 * u.beta.sum()) <= 1e-5);
    }
}

TEST_CASE("single-state Lagrangian") {
    // With y entering linearly the Lagrangian is min(0.5 G, 1 - 0.5 G) - see the notes on the benchmark.
    for (double g : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        const PsiResult r = psi_of_gamma(bench, g);
        CHECK(r.psi == doctest::Approx(std::min(0.5 * g, 1.0 - 0.5 * g)).epsilon(1e-9));
        CHECK(std::abs(r.subgrad - r.subgrad_dual) <= 1e-6);
        CHECK(r.solution.gap <= 1e-7);
        // beta + G beta' is the 1-state product value exactly.
        const auto c = combine_values(r.solution.beta, r.solution.V, r.solution.beta_k, r.solution.V_k, g);
        CHECK(c.beta[0] == doctest::Approx(r.solution.beta[0] + g * r.solution.beta_k[0]).epsilon(1e-15));
    }
}

TEST_CASE("psi is concave and the two subgradients agree") {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        const Mdp m = random_dense(2, 2, 20 + seed, 0.0, 1.0, 0.5);
        std::vector<std::pair<double, double>> pts;
        for (double g : {0.0, 0.25, 0.5, 1.0, 2.0}) {
            const PsiResult r = psi_of_gamma(m, g);
            CHECK(std::abs(r.subgrad - r.subgrad_dual) <= 1e-6);
            pts.emplace_back(g, r.psi);
        }
        for (std::size_t a = 0; a < pts.size(); ++a)
            for (std::size_t b = a + 1; b < pts.size(); ++b) {
                const double mid = psi_of_gamma(m, 0.5 * (pts[a].first + pts[b].first)).psi;
                CHECK(mid >= 0.5 * (pts[a].second + pts[b].second) - 1e-8);
            }
    }
}

TEST_CASE("product program optimum matches the combined point") {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        const Mdp m = random_dense(2, 2, 30 + seed, 0.0, 1.0, 0.5);
        for (double g : {0.5, 1.0}) {
            const PsiResult r = psi_of_gamma(m, g);
            const ProductCheck pc = check_product(m, r.solution);
            const double expect = 2.0 * (r.solution.beta.sum() + g * r.solution.beta_k.sum());
            CHECK(pc.combined_objective == doctest::Approx(expect).epsilon(1e-12));
            CHECK(std::abs(pc.product_optimum - expect) <= 1e-5);
            CHECK(pc.combined_residual <= 1e-8);
        }
    }
}

TEST_CASE("mix_to_bound meets the bound from the feasible side") {
    const auto [y, w] = mix_to_bound(bench, Matrix{{0.0, 1.0}}, Matrix{{1.0, 0.0}});
    const double rate = evaluate_policy(bench, Policy::randomized(y), CostTag::Constraint).lambda[0];
    CHECK(rate <= 0.5);
    CHECK(rate >= 0.5 - 1e-9);
    CHECK(y(0, 0) == doctest::Approx(kBenchY1).epsilon(1e-9));
    // w weights the feasible end, which puts everything on the second action.
    CHECK(w == doctest::Approx(1.0 - kBenchY1).epsilon(1e-9));
}

TEST_CASE("ascent on the benchmark") {
    AscentConfig cfg;
    const AscentResult r = subgradient_ascent(bench, cfg);
    double best = -kInf;
    for (const auto& s : r.trace) {
        CHECK(s.gamma >= 0.0);
        CHECK(std::abs(s.subgrad - s.subgrad_dual) <= 1e-6);
        best = std::max(best, s.psi);
    }
    CHECK(best == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(r.feasible);
    CHECK(r.constraint_lambda[0] <= 0.5 + 1e-3);
    CHECK(std::abs(r.objective - kBenchCost) <= 1e-3);
    CHECK(std::abs(r.policy.y()(0, 0) - kBenchY1) <= 5e-3);
    MESSAGE("steps " << r.trace.size() << ", converged " << r.converged << ", gamma " << r.gamma);

    // Weak duality against the grid.
    const GridResult grid = constrained_grid_search(bench, 1000);
    CHECK(best <= grid.objective + 1e-3);
    CHECK(std::abs(grid.objective - kBenchCost) <= 1e-3);

    std::ostringstream csv;
    write_ascent_csv(csv, r.trace);
    const std::string text = csv.str();
    CHECK(text.substr(0, text.find('\n')) == "n,gamma,psi,subgrad,primal_obj,dual_obj,constraint_value");
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == r.trace.size() + 1);
}

TEST_CASE("ascent trace is concave along its points") {
    AscentConfig cfg;
    cfg.max_steps = 25;
    cfg.a0 = 0.5;
    const Mdp m = random_dense(2, 2, 41, 0.0, 1.0, 0.45);
    const AscentResult r = subgradient_ascent(m, cfg);
    for (std::size_t a = 0; a < r.trace.size(); a += 4)
        for (std::size_t b = a + 4; b < r.trace.size(); b += 4) {
            const double mid = psi_of_gamma(m, 0.5 * (r.trace[a].gamma + r.trace[b].gamma)).psi;
            CHECK(mid >= 0.5 * (r.trace[a].psi + r.trace[b].psi) - 1e-8);
        }
}

TEST_CASE("ascent input checks") {
    AscentConfig cfg;
    cfg.a0 = -1.0;
    CHECK_THROWS_AS(subgradient_ascent(bench, cfg), ValidationError);
    CHECK_THROWS_AS(subgradient_ascent(random_dense(2, 2, 1), AscentConfig{}), ValidationError);
}
