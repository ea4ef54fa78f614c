#pragma once

#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

#include <cstdint>
#include <vector>

namespace rsmdp {

/**
 * Brute-force reference computations written against the raw definitions. Nothing here
 * calls the spectral, dp or game_lp code except the grid search, which evaluates with the
 * spectral module for speed.
 */

/// log E_i[exp(sum of the first N stage costs)] per start state, by backward recursion in the log domain.
Vector finite_horizon_value(const Mdp& m, const Policy& pol, CostTag tag, int horizon);

struct GrowthEstimate {
    /// finite_horizon_value / N
    Vector estimate;
    /// (value(N) - value(N - D)) / D with D = ceil(N / 10).
    Vector tail_slope;
    int horizon = 0;
};

/// Requires N >= 100.
GrowthEstimate growth_rate_estimate(const Mdp& m, const Policy& pol, CostTag tag, int horizon);

/// Per-state log-growth rate from eigenvalues of each communicating block (Eigen::EigenSolver).
Vector oracle_growth_rates(const Mdp& m, const Policy& pol, CostTag tag);

struct EnumerationReport {
    int n_policies = 0;
    /// Row p holds the per-state rates of policy p.
    Matrix table;
    Vector min_lambda;
    /// Index of the first policy attaining min_lambda at each state.
    std::vector<int> argmin;
    double lambda_star = 0.0;
    int argmax_state = 0;
};

/// Action of policy `index` at each state; state 0 is the fastest-varying digit.
std::vector<int> decode_policy(int index, int n_states, int n_actions);

inline constexpr long kEnumerationGuard = 1000000;

/// All |A|^|S| deterministic stationary policies; throws GuardError above kEnumerationGuard.
EnumerationReport enumerate_policies(const Mdp& m, CostTag tag);

struct MonteCarloEstimate {
    double estimate = 0.0;
    /// 95% half-width of the estimate by the delta method on the exp scale.
    double half_width = 0.0;
    int horizon = 0;
    int n_paths = 0;
};

/// (1/N) log of the sample mean of exp(sum of N stage costs) over paths started at `start`.
MonteCarloEstimate monte_carlo_cost(const Mdp& m, const Policy& pol, CostTag tag, int start, int horizon, int n_paths,
                                    std::uint64_t seed);

struct GridResult {
    bool feasible = false;
    Matrix y;
    Vector cost_lambda;
    Vector constraint_lambda;
    /// sum_i of the cost rates of the best feasible grid policy.
    double objective = 0.0;
    long n_points = 0;
    long n_feasible = 0;
};

inline constexpr long kGridGuard = 1000000;

/// Number of grid policies: C(mesh + |A| - 1, |A| - 1)^|S|, or -1 past the guard.
long grid_size(int n_states, int n_actions, int mesh);

/**
 * Minimizes sum_i lambda_c,i over per-state action distributions with step 1/mesh subject to
 * max_i lambda_k,i <= bound. Throws GuardError when the grid exceeds kGridGuard points.
 */
GridResult constrained_grid_search(const Mdp& m, int mesh);

}  // namespace rsmdp
