#include "rsmdp/constrained.hpp"

#include "rsmdp/spectral.hpp"
#include "rsmdp/variational.hpp"

#include <cstdio>
#include <stdexcept>

namespace rsmdp {

ProductChain product_chain(const Mdp& m, double gamma) {
    if (!m.has_constraint()) throw ValidationError("product chain needs a constraint cost");
    const int n = m.n_states;
    const int na = m.n_actions;
    const Matrix& k = *m.constraint_cost;
    std::vector<Matrix> p(static_cast<std::size_t>(n * n), Matrix::Zero(na, n * n));
    Matrix cost(n * n, na);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int s = i * n + j;
            for (int u = 0; u < na; ++u) {
                cost(s, u) = m.cost(i, u) + gamma * k(j, u);
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) p[s](u, a * n + b) = m.p[i](u, a) * m.p[j](u, b);
            }
        }
    }
    ProductChain out;
    out.mdp = make_mdp(std::move(p), std::move(cost));
    out.gamma = gamma;
    out.n_component = n;
    return out;
}

CombinedValues combine_values(const Vector& beta, const Vector& V, const Vector& beta_k, const Vector& V_k,
                              double gamma) {
    const Eigen::Index n = beta.size();
    CombinedValues out{Vector(n * n), Vector(n * n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out.beta[i * n + j] = beta[i] + gamma * beta_k[j];
            out.V[i * n + j] = V[i] + gamma * V_k[j];
        }
    }
    return out;
}

namespace {

double outer_dot(const Vector& q, const Vector& qk, const Vector& x) {
    const Eigen::Index n = q.size();
    double s = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
        if (q[a] == 0.0) continue;
        for (Eigen::Index b = 0; b < n; ++b) s += q[a] * qk[b] * x[a * n + b];
    }
    return s;
}

// Candidates whose growth or value row is tight at the component solution.
CandidateSet tight_rows(const Mdp& m, const CandidateSet& cands, const Vector& beta, const Vector& V, const Matrix& y,
                        CostTag tag) {
    CandidateSet out;
    out.rows.resize(cands.rows.size());
    for (int i = 0; i < cands.n_states(); ++i) {
        const Vector yi = y.row(i).transpose();
        for (const auto& c : cands.rows[i]) {
            const double s1 = beta[i] - c.q.dot(beta);
            double payoff = 0.0;
            for (int u = 0; u < m.n_actions; ++u)
                if (yi[u] > 0.0) payoff += yi[u] * c_tilde(m, i, u, c.q, tag);
            const double s2 = V[i] + beta[i] - payoff - c.q.dot(V);
            if (std::min(s1, s2) <= 1e-7) out.rows[i].push_back(c);
        }
    }
    return out;
}

}  // namespace

ProductProgram build_product_lp(const Mdp& m, const CandidateSet& c_cands, const CandidateSet& k_cands, double gamma) {
    if (!m.has_constraint()) throw ValidationError("product program needs a constraint cost");
    const int n = m.n_states;
    const int na = m.n_actions;
    ProductProgram prog;
    prog.n = n;
    prog.n_actions = na;
    const int n_vars = 2 * n * n + n * na;
    StandardLp& lp = prog.lp;
    lp = StandardLp::with_vars(n_vars);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            lp.lower[prog.beta(i, j)] = -kInf;
            lp.lower[prog.V(i, j)] = -kInf;
            lp.objective[prog.beta(i, j)] = 1.0;
        }
    }
    lp.a_eq = Matrix::Zero(n, n_vars);
    lp.b_eq = Vector::Ones(n);
    for (int i = 0; i < n; ++i)
        for (int u = 0; u < na; ++u) lp.a_eq(i, prog.y(i, u)) = 1.0;

    long n_rows = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) n_rows += 2L * static_cast<long>(c_cands.rows[i].size() * k_cands.rows[j].size());
    lp.a_ge = Matrix::Zero(n_rows, n_vars);
    lp.b_ge = Vector::Zero(n_rows);
    int r = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (const auto& cq : c_cands.rows[i]) {
                for (const auto& ck : k_cands.rows[j]) {
                    // growth
                    lp.a_ge(r, prog.beta(i, j)) += 1.0;
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b) lp.a_ge(r, prog.beta(a, b)) -= cq.q[a] * ck.q[b];
                    ++r;
                    // value
                    lp.a_ge(r, prog.V(i, j)) += 1.0;
                    lp.a_ge(r, prog.beta(i, j)) += 1.0;
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b) lp.a_ge(r, prog.V(a, b)) -= cq.q[a] * ck.q[b];
                    for (int u = 0; u < na; ++u) {
                        lp.a_ge(r, prog.y(i, u)) -= c_tilde(m, i, u, cq.q, CostTag::Primary);
                        lp.a_ge(r, prog.y(j, u)) -= gamma * c_tilde(m, j, u, ck.q, CostTag::Constraint);
                    }
                    ++r;
                }
            }
        }
    }
    if (!lp.a_ge.allFinite()) throw std::logic_error("candidate row outside the transition support");
    return prog;
}

ProductCheck check_product(const Mdp& m, const GameSolution& sol, const LpOptions& opts) {
    if (!sol.gamma) throw ValidationError("product check needs a Lagrangian solution");
    const double gamma = *sol.gamma;
    const int n = m.n_states;
    const Matrix& y = sol.policy.y();
    ProductCheck out;

    const CombinedValues cv = combine_values(sol.beta, sol.V, sol.beta_k, sol.V_k, gamma);
    out.combined_objective = cv.beta.sum();

    // Residual of the combined point over every stored candidate pair.
    int row = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int s = i * n + j;
            for (const auto& cq : sol.candidates.rows[i]) {
                double pay_c = 0.0;
                for (int u = 0; u < m.n_actions; ++u)
                    if (y(i, u) > 0.0) pay_c += y(i, u) * c_tilde(m, i, u, cq.q, CostTag::Primary);
                for (const auto& ck : sol.k_candidates.rows[j]) {
                    double pay_k = 0.0;
                    for (int u = 0; u < m.n_actions; ++u)
                        if (y(j, u) > 0.0) pay_k += y(j, u) * c_tilde(m, j, u, ck.q, CostTag::Constraint);
                    const double c1 = cv.beta[s] - outer_dot(cq.q, ck.q, cv.beta);
                    const double c2 = cv.V[s] + cv.beta[s] - outer_dot(cq.q, ck.q, cv.V) - pay_c - gamma * pay_k;
                    for (double slack : {c1, c2}) {
                        if (-slack > out.combined_residual) {
                            out.combined_residual = -slack;
                            out.worst_row = row;
                        }
                        ++row;
                    }
                }
            }
        }
    }

    const CandidateSet tc = tight_rows(m, sol.candidates, sol.beta, sol.V, y, CostTag::Primary);
    const CandidateSet tk = tight_rows(m, sol.k_candidates, sol.beta_k, sol.V_k, y, CostTag::Constraint);
    const ProductProgram prog = build_product_lp(m, tc, tk, gamma);
    const LpSolution ps = solve_lp(prog.lp, opts);
    if (ps.status != LpStatus::Optimal) throw NumericError(std::string("product program returned ") + to_string(ps.status));
    out.product_optimum = ps.objective_value;
    out.pivots = ps.pivots;
    return out;
}

PsiResult psi_of_gamma(const Mdp& m, double gamma, const GenerationOptions& opts) {
    PsiResult out;
    out.gamma = gamma;
    out.solution = solve_lagrangian(m, gamma, opts);
    const GameSolution& sol = out.solution;
    const int n = m.n_states;
    const double slack = n * m.bound.value();
    out.psi = sol.primal_obj;
    out.subgrad = sol.beta_k.sum() - slack;

    const Matrix& y = sol.policy.y();
    double dual_form = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& cands = sol.k_candidates.rows[i];
        for (std::size_t k = 0; k < cands.size(); ++k) {
            const double mu = sol.mu_k_primal[i][static_cast<Eigen::Index>(k)];
            if (mu == 0.0) continue;
            dual_form += mu * mixed_c_tilde(m, i, y.row(i).transpose(), cands[k].q, CostTag::Constraint);
        }
    }
    out.subgrad_dual = dual_form - slack;
    if (std::abs(out.subgrad - out.subgrad_dual) > 1e-6) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "subgradient forms disagree at gamma %.17g: %.12g vs %.12g", gamma, out.subgrad,
                      out.subgrad_dual);
        throw NumericError(buf);
    }
    return out;
}

namespace {

double max_constraint_rate(const Mdp& m, const Matrix& y) {
    return evaluate_policy(m, Policy::randomized(y), CostTag::Constraint).lambda.maxCoeff();
}

}  // namespace

std::pair<Matrix, double> mix_to_bound(const Mdp& m, const Matrix& feasible, const Matrix& infeasible, double tol) {
    const double bound = m.bound.value();
    double lo = 0.0, hi = 1.0;  // weight on the feasible policy; hi stays feasible
    while (hi - lo > tol) {
        const double w = 0.5 * (lo + hi);
        if (max_constraint_rate(m, w * feasible + (1.0 - w) * infeasible) <= bound)
            hi = w;
        else
            lo = w;
    }
    return {hi * feasible + (1.0 - hi) * infeasible, hi};
}

AscentResult subgradient_ascent(const Mdp& m, const AscentConfig& config) {
    if (!m.has_constraint() || !m.bound) throw ValidationError("constraint cost and bound required");
    if (!(config.gamma0 >= 0.0) || !(config.a0 > 0.0) || config.max_steps < 1 || config.window < 1)
        throw ValidationError("invalid ascent configuration");
    const double bound = m.bound.value();
    AscentResult out;
    std::optional<Matrix> last_feasible, last_infeasible;
    double gamma = config.gamma0;
    int calm = 0;
    for (int n = 0; n < config.max_steps; ++n) {
        PsiResult r;
        try {
            r = psi_of_gamma(m, gamma, config.generation);
        } catch (const Error& e) {
            throw AscentError(e.what(), out.trace);
        }
        AscentStep step;
        step.n = n;
        step.gamma = gamma;
        step.psi = r.psi;
        step.subgrad = r.subgrad;
        step.subgrad_dual = r.subgrad_dual;
        step.primal_obj = r.solution.primal_obj;
        step.dual_obj = r.solution.dual_obj;
        step.y = r.solution.policy.y();
        step.constraint_value = max_constraint_rate(m, step.y);
        (step.constraint_value <= bound ? last_feasible : last_infeasible) = step.y;
        out.trace.push_back(step);

        const double next = projected_step(gamma, config.a0 / (1.0 + n), r.subgrad);
        calm = std::abs(next - gamma) < config.tol ? calm + 1 : 0;
        gamma = next;
        if (calm >= config.window) {
            out.converged = true;
            break;
        }
    }
    out.gamma = gamma;

    Matrix y;
    if (last_feasible && last_infeasible) {
        auto [mixed, w] = mix_to_bound(m, *last_feasible, *last_infeasible);
        y = std::move(mixed);
        out.mix_weight = w;
    } else {
        y = last_feasible ? *last_feasible : out.trace.back().y;
        out.mix_weight = 1.0;
    }
    out.policy = Policy::randomized(y);
    out.cost_lambda = evaluate_policy(m, out.policy, CostTag::Primary).lambda;
    out.constraint_lambda = evaluate_policy(m, out.policy, CostTag::Constraint).lambda;
    out.objective = out.cost_lambda.sum();
    out.feasible = out.constraint_lambda.maxCoeff() <= bound;
    return out;
}

void write_ascent_csv(std::ostream& out, const std::vector<AscentStep>& trace) {
    out << "n,gamma,psi,subgrad,primal_obj,dual_obj,constraint_value\n";
    char buf[512];
    for (const auto& s : trace) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.n, s.gamma, s.psi, s.subgrad,
                      s.primal_obj, s.dual_obj, s.constraint_value);
        out << buf;
    }
}

}  // namespace rsmdp
