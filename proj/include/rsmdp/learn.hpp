#pragma once

#include "rsmdp/model.hpp"

#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

namespace rsmdp {

struct LearnerConfig {
    double a0 = 0.5;
    double a_decay = 1e-3;
    double b0 = 1.0;
    std::uint64_t seed = 0;
    long max_steps = 1000000;
    /// Reference product state and action for the normalization.
    int ref_state = 0;
    int ref_action = 0;
    double gamma0 = 0.0;
    double gamma_cap = 100.0;
    /// Constraint level in log-growth units.
    double theta = 0.0;
    double epsilon = 0.1;
    bool freeze_gamma = false;
    long trace_every = 1000;
    /// Steps at the end of the run summarized in the result.
    long tail = 10000;

    static constexpr double kFastExponent = 0.6;
    static constexpr double kSlowExponent = 1.0;

    double a(long n) const { return a0 / std::pow(1.0 + n * a_decay, kFastExponent); }
    double b(long n) const { return b0 / (1.0 + n); }
    void check() const;
};

// sum a(n) = inf and sum a(n)^2 < inf; the slow rate decays strictly faster.
static_assert(LearnerConfig::kFastExponent > 0.5 && LearnerConfig::kFastExponent <= 1.0);
static_assert(LearnerConfig::kSlowExponent > 0.5 && LearnerConfig::kSlowExponent <= 1.0);
static_assert(LearnerConfig::kSlowExponent > LearnerConfig::kFastExponent);

/// Q over product states (i, j) -> i * n + j.
struct QTable {
    Matrix q;
    double gamma = 0.0;
    int ref_state = 0;
    int ref_action = 0;

    double lambda_estimate() const { return std::log(q(ref_state, ref_action)); }
    /// argmin_u q(s, u), lowest index on ties.
    int greedy(int s) const;
};

struct ProductTransition {
    int state = 0;
    int action = 0;
    int next = 0;
    /// c(i, u) + gamma k(j, u) at the time of the step.
    double cost = 0.0;
    /// k(j, u), the constraint cost seen by the constraint copy.
    double constraint = 0.0;
};

/// j ~ p(. | i, u) by inversion of one uniform draw.
int simulate_step(const Mdp& m, int state, int action, std::mt19937_64& rng);

/// q(s,u) <- q(s,u) + a [exp(h) min_b q(s',b) / q(ref) - q(s,u)].
void rs_q_step(QTable& qt, const ProductTransition& tr, double step);

/// clamp(gamma + b (k_obs - theta), 0, gamma_cap)
double gamma_step(double gamma, double k_obs, const LearnerConfig& config, long n);

struct LearnTraceRow {
    long n = 0;
    double gamma = 0.0;
    double lambda_estimate = 0.0;
    double epsilon = 0.0;
    int visited_state = 0;
};

struct LearnResult {
    std::vector<LearnTraceRow> trace;
    QTable table;
    double gamma = 0.0;
    /// Greedy action per product state at the end.
    std::vector<int> product_policy;
    /// Greedy action at the diagonal state (i, i) for each component state i.
    std::vector<int> greedy_policy;
    /// Share of tail steps in which the diagonal greedy action was u, per component state.
    Matrix tail_average;
    double gamma_tail_min = 0.0;
    double gamma_tail_max = 0.0;
    /// Mixture of the last feasible and last infeasible tail greedy policies, weighted to meet theta.
    Policy policy;
    double mix_weight = 1.0;
    Vector cost_lambda;
    Vector constraint_lambda;
};

LearnResult run_two_timescale(const Mdp& m, const LearnerConfig& config);

/// Header plus one row per trace entry: n,gamma,lambda_estimate,epsilon,visited_state.
void write_learn_csv(std::ostream& out, const std::vector<LearnTraceRow>& trace);

}  // namespace rsmdp
