#include "rsmdp/learn.hpp"

#include "rsmdp/constrained.hpp"
#include "rsmdp/errors.hpp"
#include "rsmdp/spectral.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>

namespace rsmdp {

void LearnerConfig::check() const {
    if (!(a0 > 0.0 && a0 <= 1.0)) throw ValidationError("a0 must lie in (0, 1] to keep q positive");
    if (!(a_decay > 0.0)) throw ValidationError("a_decay must be positive");
    if (!(b0 > 0.0)) throw ValidationError("b0 must be positive");
    if (max_steps < 1) throw ValidationError("max_steps must be positive");
    if (!(gamma0 >= 0.0 && gamma0 <= gamma_cap)) throw ValidationError("gamma0 must lie in [0, gamma_cap]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
    if (trace_every < 1 || tail < 1) throw ValidationError("trace_every and tail must be positive");
}

int QTable::greedy(int s) const {
    int best = 0;
    for (int u = 1; u < q.cols(); ++u)
        if (q(s, u) < q(s, best)) best = u;
    return best;
}

namespace {

double uniform(std::mt19937_64& rng) { return std::generate_canonical<double, 64>(rng); }

int draw_row(const Matrix& p, int action, double r) {
    double acc = 0.0;
    int last = 0;
    for (int j = 0; j < p.cols(); ++j) {
        if (p(action, j) <= 0.0) continue;
        last = j;
        acc += p(action, j);
        if (r < acc) return j;
    }
    return last;
}

}  // namespace

int simulate_step(const Mdp& m, int state, int action, std::mt19937_64& rng) {
    return draw_row(m.p[state], action, uniform(rng));
}

void rs_q_step(QTable& qt, const ProductTransition& tr, double step) {
    const double target = std::exp(tr.cost) * qt.q.row(tr.next).minCoeff() / qt.q(qt.ref_state, qt.ref_action);
    qt.q(tr.state, tr.action) += step * (target - qt.q(tr.state, tr.action));
}

double gamma_step(double gamma, double k_obs, const LearnerConfig& config, long n) {
    return std::clamp(gamma + config.b(n) * (k_obs - config.theta), 0.0, config.gamma_cap);
}

LearnResult run_two_timescale(const Mdp& m, const LearnerConfig& config) {
    config.check();
    if (!config.freeze_gamma && !m.has_constraint()) throw ValidationError("learning with a moving gamma needs a constraint cost");
    const int n = m.n_states;
    const int na = m.n_actions;
    const int n_prod = n * n;
    if (config.ref_state < 0 || config.ref_state >= n_prod || config.ref_action < 0 || config.ref_action >= na)
        throw ValidationError("reference pair out of range");
    const Matrix k = m.has_constraint() ? *m.constraint_cost : Matrix::Zero(n, na);

    LearnResult out;
    QTable& qt = out.table;
    qt.q = Matrix::Ones(n_prod, na);
    qt.gamma = config.gamma0;
    qt.ref_state = config.ref_state;
    qt.ref_action = config.ref_action;

    std::mt19937_64 rng(config.seed);
    int i = 0, j = 0;
    const long tail_start = std::max(0L, config.max_steps - config.tail);
    out.tail_average = Matrix::Zero(n, na);
    out.gamma_tail_min = kInf;
    out.gamma_tail_max = -kInf;
    std::vector<std::vector<int>> tail_policies;

    for (long step = 0; step < config.max_steps; ++step) {
        const int s = i * n + j;
        int u = qt.greedy(s);
        if (uniform(rng) < config.epsilon) u = std::min(na - 1, static_cast<int>(uniform(rng) * na));
        const int i2 = simulate_step(m, i, u, rng);
        const int j2 = simulate_step(m, j, u, rng);
        ProductTransition tr{s, u, i2 * n + j2, m.cost(i, u) + qt.gamma * k(j, u), k(j, u)};
        rs_q_step(qt, tr, config.a(step));
        if (!config.freeze_gamma) qt.gamma = gamma_step(qt.gamma, tr.constraint, config, step);

        if (step >= tail_start) {
            out.gamma_tail_min = std::min(out.gamma_tail_min, qt.gamma);
            out.gamma_tail_max = std::max(out.gamma_tail_max, qt.gamma);
            std::vector<int> diag(n);
            for (int c = 0; c < n; ++c) {
                diag[c] = qt.greedy(c * n + c);
                out.tail_average(c, diag[c]) += 1.0;
            }
            if (tail_policies.empty() || tail_policies.back() != diag) tail_policies.push_back(diag);
        }
        if ((step + 1) % config.trace_every == 0)
            out.trace.push_back({step + 1, qt.gamma, qt.lambda_estimate(), config.epsilon, tr.next});
        i = i2;
        j = j2;
    }
    out.tail_average /= static_cast<double>(config.max_steps - tail_start);
    out.gamma = qt.gamma;
    out.product_policy.resize(n_prod);
    for (int s = 0; s < n_prod; ++s) out.product_policy[s] = qt.greedy(s);
    out.greedy_policy.resize(n);
    for (int c = 0; c < n; ++c) out.greedy_policy[c] = qt.greedy(c * n + c);

    // Primal recovery: the Lagrangian-greedy policies alternate around the multiplier, so the
    // last feasible and last infeasible ones are mixed to meet theta.
    Mdp bounded = m;
    bounded.constraint_cost = k;
    bounded.bound = config.theta;
    std::optional<Matrix> feasible, infeasible;
    for (const auto& act : tail_policies) {
        const Policy pol = Policy::deterministic(act, na);
        const double rate = evaluate_policy(bounded, pol, CostTag::Constraint).lambda.maxCoeff();
        (rate <= config.theta ? feasible : infeasible) = pol.y();
    }
    if (feasible && infeasible) {
        auto [y, w] = mix_to_bound(bounded, *feasible, *infeasible);
        out.policy = Policy::randomized(y);
        out.mix_weight = w;
    } else {
        out.policy = Policy::deterministic(out.greedy_policy, na).to_randomized();
    }
    out.cost_lambda = evaluate_policy(bounded, out.policy, CostTag::Primary).lambda;
    out.constraint_lambda = evaluate_policy(bounded, out.policy, CostTag::Constraint).lambda;
    return out;
}

void write_learn_csv(std::ostream& out, const std::vector<LearnTraceRow>& trace) {
    out << "n,gamma,lambda_estimate,epsilon,visited_state\n";
    char buf[256];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%d\n", r.n, r.gamma, r.lambda_estimate, r.epsilon,
                      r.visited_state);
        out << buf;
    }
}

}  // namespace rsmdp
