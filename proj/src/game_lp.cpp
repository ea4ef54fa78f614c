#include "rsmdp/game_lp.hpp"

#include "rsmdp/spectral.hpp"
#include "rsmdp/variational.hpp"

#include <random>
#include <stdexcept>

namespace rsmdp {

const char* to_string(CandidateSource s) {
    switch (s) {
        case CandidateSource::Vertex: return "vertex";
        case CandidateSource::Tilt: return "tilt";
        case CandidateSource::MixtureTilt: return "mixture_tilt";
        case CandidateSource::Seed: return "seed";
    }
    return "?";
}

int CandidateSet::total() const {
    int t = 0;
    for (const auto& r : rows) t += static_cast<int>(r.size());
    return t;
}

bool CandidateSet::add(int i, Vector q, CandidateSource source) {
    for (const auto& c : rows[i])
        if ((c.q - q).lpNorm<1>() < 1e-9) return false;
    rows[i].push_back({std::move(q), source});
    return true;
}

CandidateSet seed_candidates(const Mdp& m, int n_random, std::uint64_t seed) {
    const int n = m.n_states;
    CandidateSet out;
    out.rows.resize(n);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n; ++i) {
        for (int u = 0; u < m.n_actions; ++u) out.add(i, m.p[i].row(u).transpose(), CandidateSource::Seed);
        const auto supp = support_union(m, i);
        for (int j : supp) out.add(i, Vector::Unit(n, j), CandidateSource::Vertex);
        for (int r = 0; r < n_random; ++r) {
            // Uniform on the face: normalized exponential draws.
            Vector q = Vector::Zero(n);
            for (int j : supp) q[j] = -std::log1p(-std::generate_canonical<double, 64>(rng));
            out.add(i, q / q.sum(), CandidateSource::Seed);
        }
    }
    return out;
}

double mixed_c_tilde(const Mdp& m, int i, const Vector& y_row, const Vector& q, CostTag tag) {
    double s = 0.0;
    for (int u = 0; u < m.n_actions; ++u) {
        if (y_row[u] <= 0.0) continue;
        const double ct = c_tilde(m, i, u, q, tag);
        if (!std::isfinite(ct)) throw std::logic_error("candidate row outside the transition support");
        s += y_row[u] * ct;
    }
    return s;
}

namespace {

double checked_c_tilde(const Mdp& m, int i, int u, const Vector& q, CostTag tag) {
    const double ct = c_tilde(m, i, u, q, tag);
    if (!std::isfinite(ct)) throw std::logic_error("candidate row outside the transition support");
    return ct;
}

PrimalProgram build_primal_impl(const Mdp& m, const CandidateSet& c_cands, CostTag tag, const CandidateSet* k_cands,
                                double gamma, const std::optional<Matrix>& fixed_y) {
    const int n = m.n_states;
    const int na = m.n_actions;
    PrimalProgram prog;
    prog.n = n;
    prog.n_actions = na;
    prog.has_y = !fixed_y.has_value();
    prog.lagrangian = k_cands != nullptr;
    prog.gamma = gamma;
    const int n_vars = 2 * n + (prog.has_y ? n * na : 0) + (prog.lagrangian ? 2 * n : 0);
    StandardLp& lp = prog.lp;
    lp = StandardLp::with_vars(n_vars);
    for (int i = 0; i < n; ++i) {
        lp.lower[prog.beta(i)] = -kInf;
        lp.lower[prog.V(i)] = -kInf;
        lp.objective[prog.beta(i)] = 1.0;
        if (prog.lagrangian) {
            lp.lower[prog.beta_k(i)] = -kInf;
            lp.lower[prog.V_k(i)] = -kInf;
            lp.objective[prog.beta_k(i)] = gamma;
        }
    }
    if (prog.lagrangian) lp.constant = -gamma * n * m.bound.value();

    const int n_rows = 2 * c_cands.total() + (prog.lagrangian ? 2 * k_cands->total() : 0);
    lp.a_ge = Matrix::Zero(n_rows, n_vars);
    lp.b_ge = Vector::Zero(n_rows);
    if (prog.has_y) {
        lp.a_eq = Matrix::Zero(n, n_vars);
        lp.b_eq = Vector::Ones(n);
        for (int i = 0; i < n; ++i)
            for (int u = 0; u < na; ++u) lp.a_eq(i, prog.y(i, u)) = 1.0;
    }

    int r = 0;
    auto fill = [&](const CandidateSet& cands, CostTag block_tag, bool k_block, std::vector<std::vector<int>>& rows) {
        rows.assign(n, {});
        for (int i = 0; i < n; ++i) {
            const int bi = k_block ? prog.beta_k(i) : prog.beta(i);
            const int vi = k_block ? prog.V_k(i) : prog.V(i);
            for (const auto& cand : cands.rows[i]) {
                rows[i].push_back(r);
                const Vector& q = cand.q;
                // growth
                lp.a_ge(r, bi) += 1.0;
                for (int j = 0; j < n; ++j)
                    lp.a_ge(r, k_block ? prog.beta_k(j) : prog.beta(j)) -= q[j];
                ++r;
                // value
                lp.a_ge(r, vi) += 1.0;
                lp.a_ge(r, bi) += 1.0;
                for (int j = 0; j < n; ++j) lp.a_ge(r, k_block ? prog.V_k(j) : prog.V(j)) -= q[j];
                if (prog.has_y) {
                    for (int u = 0; u < na; ++u) lp.a_ge(r, prog.y(i, u)) -= checked_c_tilde(m, i, u, q, block_tag);
                } else {
                    lp.b_ge[r] = mixed_c_tilde(m, i, fixed_y->row(i).transpose(), q, block_tag);
                }
                ++r;
            }
        }
    };
    fill(c_cands, tag, false, prog.row_c);
    if (prog.lagrangian) fill(*k_cands, CostTag::Constraint, true, prog.row_k);
    return prog;
}

DualProgram build_dual_impl(const Mdp& m, const CandidateSet& c_cands, CostTag tag, const CandidateSet* k_cands,
                            double gamma, const std::optional<Matrix>& fixed_y) {
    const int n = m.n_states;
    const int na = m.n_actions;
    DualProgram prog;
    prog.n = n;
    prog.lagrangian = k_cands != nullptr;
    int col = 0;
    auto assign_cols = [&](const CandidateSet& cands, std::vector<std::vector<int>>& mu,
                           std::vector<std::vector<int>>& nu) {
        mu.assign(n, {});
        nu.assign(n, {});
        for (int i = 0; i < n; ++i)
            for (std::size_t k = 0; k < cands.rows[i].size(); ++k) {
                mu[i].push_back(col++);
                nu[i].push_back(col++);
            }
    };
    assign_cols(c_cands, prog.mu_col, prog.nu_col);
    if (prog.lagrangian) assign_cols(*k_cands, prog.mu_k_col, prog.nu_k_col);
    const bool has_w = !fixed_y.has_value();
    prog.w_offset = col;
    const int n_vars = col + (has_w ? n : 0);

    StandardLp& lp = prog.lp;
    lp = StandardLp::with_vars(n_vars);
    const int n_blocks = prog.lagrangian ? 2 : 1;
    lp.a_eq = Matrix::Zero(2 * n * n_blocks, n_vars);
    lp.b_eq = Vector::Zero(2 * n * n_blocks);

    auto fill_flow = [&](const CandidateSet& cands, const std::vector<std::vector<int>>& mu,
                         const std::vector<std::vector<int>>& nu, int row0) {
        for (int j = 0; j < n; ++j) lp.b_eq[row0 + n + j] = 1.0;
        for (int i = 0; i < n; ++i)
            for (std::size_t k = 0; k < cands.rows[i].size(); ++k) {
                const Vector& q = cands.rows[i][k].q;
                for (int j = 0; j < n; ++j) {
                    const double coef = (i == j ? 1.0 : 0.0) - q[j];
                    lp.a_eq(row0 + j, mu[i][k]) += coef;      // balance
                    lp.a_eq(row0 + n + j, nu[i][k]) += coef;  // flow
                }
                lp.a_eq(row0 + n + i, mu[i][k]) += 1.0;
            }
    };
    fill_flow(c_cands, prog.mu_col, prog.nu_col, 0);
    if (prog.lagrangian) fill_flow(*k_cands, prog.mu_k_col, prog.nu_k_col, 2 * n);

    if (!has_w) {
        for (int i = 0; i < n; ++i)
            for (std::size_t k = 0; k < c_cands.rows[i].size(); ++k)
                lp.objective[prog.mu_col[i][k]] =
                    -mixed_c_tilde(m, i, fixed_y->row(i).transpose(), c_cands.rows[i][k].q, tag);
        return prog;
    }

    // action rows, one per (i, u)
    lp.a_ge = Matrix::Zero(n * na, n_vars);
    lp.b_ge = Vector::Zero(n * na);
    for (int i = 0; i < n; ++i) {
        lp.lower[prog.w(i)] = -kInf;
        lp.objective[prog.w(i)] = -1.0;
        for (int u = 0; u < na; ++u) {
            const int r = i * na + u;
            lp.a_ge(r, prog.w(i)) = -1.0;
            for (std::size_t k = 0; k < c_cands.rows[i].size(); ++k)
                lp.a_ge(r, prog.mu_col[i][k]) = checked_c_tilde(m, i, u, c_cands.rows[i][k].q, tag);
            if (prog.lagrangian) {
                for (std::size_t k = 0; k < k_cands->rows[i].size(); ++k)
                    lp.a_ge(r, prog.mu_k_col[i][k]) =
                        gamma * checked_c_tilde(m, i, u, k_cands->rows[i][k].q, CostTag::Constraint);
                lp.b_ge[r] = gamma * m.bound.value();
            }
        }
    }
    return prog;
}

void require_lagrangian(const Mdp& m, double gamma) {
    if (!m.has_constraint() || !m.bound) throw ValidationError("constraint cost and bound required");
    if (!(gamma >= 0.0)) throw ValidationError("gamma must be nonnegative");
}

void require_uniform_supports(const Mdp& m) {
    for (int i = 0; i < m.n_states; ++i) {
        const auto ref = support(m, i, 0);
        for (int u = 1; u < m.n_actions; ++u)
            if (support(m, i, u) != ref)
                throw ValidationError("state " + std::to_string(i) + ": action " + std::to_string(u) +
                                      " has a different transition support than action 0");
    }
}

Matrix clean_policy(const Matrix& y) {
    Matrix out = y.cwiseMax(0.0);
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
    return out;
}

LpSolution solve_optimal(const StandardLp& lp, const LpOptions& opts, const char* what) {
    LpSolution sol = solve_lp(lp, opts);
    if (sol.status != LpStatus::Optimal)
        throw NumericError(std::string(what) + " returned " + to_string(sol.status));
    return sol;
}

std::vector<Vector> per_candidate(const Vector& values, const std::vector<std::vector<int>>& index, double scale,
                                  bool from_rows) {
    std::vector<Vector> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        out[i].resize(static_cast<Eigen::Index>(index[i].size()));
        for (std::size_t k = 0; k < index[i].size(); ++k)
            out[i][static_cast<Eigen::Index>(k)] = scale * values[index[i][k] + (from_rows ? 1 : 0)];
    }
    return out;
}

std::vector<Vector> per_candidate_rows(const Vector& row_duals, const std::vector<std::vector<int>>& rows, int offset,
                                       double scale) {
    std::vector<Vector> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[i].resize(static_cast<Eigen::Index>(rows[i].size()));
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            out[i][static_cast<Eigen::Index>(k)] = scale * row_duals[rows[i][k] + offset];
    }
    return out;
}

struct GenerationSetup {
    CostTag tag = CostTag::Primary;
    bool lagrangian = false;
    double gamma = 0.0;
    std::optional<Matrix> fixed_y;
};

GameSolution generate(const Mdp& m, const GenerationSetup& setup, const GenerationOptions& opts) {
    require_uniform_supports(m);
    const int n = m.n_states;
    GameSolution sol;
    sol.candidates = seed_candidates(m, opts.n_random, opts.seed);
    if (setup.lagrangian) {
        sol.k_candidates = sol.candidates;
        sol.gamma = setup.gamma;
    }
    bool converged = false;
    PrimalProgram prog;
    LpSolution lps;
    for (int round = 1; round <= opts.max_rounds; ++round) {
        prog = setup.lagrangian ? build_primal(m, sol.candidates, sol.k_candidates, setup.gamma)
                                : build_primal(m, sol.candidates, setup.tag, setup.fixed_y);
        lps = solve_optimal(prog.lp, opts.lp, "primal program");
        sol.pivots += lps.pivots;
        sol.rounds = round;
        sol.primal_obj = lps.objective_value;
        sol.beta.resize(n);
        sol.V.resize(n);
        for (int i = 0; i < n; ++i) {
            sol.beta[i] = lps.x[prog.beta(i)];
            sol.V[i] = lps.x[prog.V(i)];
        }
        Matrix y(n, m.n_actions);
        if (prog.has_y) {
            for (int i = 0; i < n; ++i)
                for (int u = 0; u < m.n_actions; ++u) y(i, u) = lps.x[prog.y(i, u)];
            y = clean_policy(y);
        } else {
            y = *setup.fixed_y;
        }
        sol.policy = Policy::randomized(y);

        auto viol = separation_oracle(m, sol.beta, sol.V, y, setup.tag, opts.eps);
        if (setup.lagrangian) {
            sol.beta_k.resize(n);
            sol.V_k.resize(n);
            for (int i = 0; i < n; ++i) {
                sol.beta_k[i] = lps.x[prog.beta_k(i)];
                sol.V_k[i] = lps.x[prog.V_k(i)];
            }
            for (auto& v : separation_oracle(m, sol.beta_k, sol.V_k, y, CostTag::Constraint, opts.eps)) {
                v.primary_block = false;
                viol.push_back(std::move(v));
            }
        }
        sol.max_violation = 0.0;
        int added = 0;
        for (auto& v : viol) {
            sol.max_violation = std::max(sol.max_violation, v.amount);
            CandidateSet& target = v.primary_block ? sol.candidates : sol.k_candidates;
            added += target.add(v.state, std::move(v.q), v.source) ? 1 : 0;
        }
        if (viol.empty()) {
            converged = true;
            break;
        }
        if (added == 0) break;
    }
    if (!converged)
        throw GenerationError("constraint generation stopped after " + std::to_string(sol.rounds) +
                                  " rounds with violation " + std::to_string(sol.max_violation),
                              sol);

    if (setup.lagrangian && setup.gamma > 0.0)
        sol.mu_k_primal = per_candidate_rows(lps.dual_ge, prog.row_k, 1, 1.0 / setup.gamma);

    const DualProgram dual = setup.lagrangian ? build_dual(m, sol.candidates, sol.k_candidates, setup.gamma)
                                              : build_dual_impl(m, sol.candidates, setup.tag, nullptr, 0.0, setup.fixed_y);
    const LpSolution ds = solve_optimal(dual.lp, opts.lp, "dual program");
    sol.pivots += ds.pivots;
    sol.dual_obj = -ds.objective_value;
    sol.gap = std::abs(sol.primal_obj - sol.dual_obj);
    sol.mu = per_candidate(ds.x, dual.mu_col, 1.0, false);
    sol.nu = per_candidate(ds.x, dual.nu_col, 1.0, false);
    if (setup.lagrangian) {
        sol.mu_k = per_candidate(ds.x, dual.mu_k_col, 1.0, false);
        sol.nu_k = per_candidate(ds.x, dual.nu_k_col, 1.0, false);
    }
    if (!setup.fixed_y) {
        sol.w.resize(n);
        for (int i = 0; i < n; ++i) sol.w[i] = ds.x[dual.w(i)];
    }
    return sol;
}

}  // namespace

PrimalProgram build_primal(const Mdp& m, const CandidateSet& cands, CostTag tag, const std::optional<Matrix>& fixed_y) {
    return build_primal_impl(m, cands, tag, nullptr, 0.0, fixed_y);
}

PrimalProgram build_primal(const Mdp& m, const CandidateSet& c_cands, const CandidateSet& k_cands, double gamma) {
    require_lagrangian(m, gamma);
    return build_primal_impl(m, c_cands, CostTag::Primary, &k_cands, gamma, std::nullopt);
}

DualProgram build_dual(const Mdp& m, const CandidateSet& cands, CostTag tag) {
    return build_dual_impl(m, cands, tag, nullptr, 0.0, std::nullopt);
}

DualProgram build_dual(const Mdp& m, const CandidateSet& c_cands, const CandidateSet& k_cands, double gamma) {
    require_lagrangian(m, gamma);
    return build_dual_impl(m, c_cands, CostTag::Primary, &k_cands, gamma, std::nullopt);
}

std::vector<Violation> separation_oracle(const Mdp& m, const Vector& beta, const Vector& V, const Matrix& y,
                                         CostTag tag, double eps) {
    std::vector<Violation> out;
    const Matrix& cost = m.costs(tag);
    for (int i = 0; i < m.n_states; ++i) {
        const auto supp = support_union(m, i);
        int top = supp.front();
        for (int j : supp)
            if (beta[j] > beta[top]) top = j;
        if (beta[top] - beta[i] > eps)
            out.push_back({i, Vector::Unit(m.n_states, top), beta[top] - beta[i], CandidateSource::Vertex, true});

        std::vector<Vector> rows;
        for (int u = 0; u < m.n_actions; ++u) rows.push_back(m.p[i].row(u).transpose());
        const Vector yi = y.row(i).transpose();
        const TiltResult t = mixture_tilt(yi, rows, V);
        const double gap = yi.dot(cost.row(i).transpose()) + t.value - beta[i] - V[i];
        if (gap > eps) {
            const bool pure = yi.maxCoeff() >= 1.0 - 1e-12;
            out.push_back({i, t.q_star, gap, pure ? CandidateSource::Tilt : CandidateSource::MixtureTilt, true});
        }
    }
    return out;
}

GameSolution solve_with_generation(const Mdp& m, CostTag tag, const GenerationOptions& opts) {
    GenerationSetup setup;
    setup.tag = tag;
    return generate(m, setup, opts);
}

GameSolution solve_fixed_policy(const Mdp& m, const Matrix& y, CostTag tag, const GenerationOptions& opts) {
    Policy::randomized(y).check_against(m);
    GenerationSetup setup;
    setup.tag = tag;
    setup.fixed_y = clean_policy(y);
    return generate(m, setup, opts);
}

GameSolution solve_lagrangian(const Mdp& m, double gamma, const GenerationOptions& opts) {
    require_lagrangian(m, gamma);
    if (gamma > 0.0) {
        GenerationSetup setup;
        setup.lagrangian = true;
        setup.gamma = gamma;
        return generate(m, setup, opts);
    }
    // At gamma = 0 the k-block carries no weight; it is solved for the LP's policy instead.
    GameSolution sol = solve_with_generation(m, CostTag::Primary, opts);
    const GameSolution kb = solve_fixed_policy(m, sol.policy.y(), CostTag::Constraint, opts);
    sol.gamma = 0.0;
    sol.beta_k = kb.beta;
    sol.V_k = kb.V;
    sol.k_candidates = kb.candidates;
    sol.mu_k_primal = kb.mu;
    sol.rounds += kb.rounds;
    sol.pivots += kb.pivots;
    const DualProgram dual = build_dual(m, sol.candidates, sol.k_candidates, 0.0);
    const LpSolution ds = solve_optimal(dual.lp, opts.lp, "dual program");
    sol.pivots += ds.pivots;
    sol.dual_obj = -ds.objective_value;
    sol.gap = std::abs(sol.primal_obj - sol.dual_obj);
    sol.mu = per_candidate(ds.x, dual.mu_col, 1.0, false);
    sol.nu = per_candidate(ds.x, dual.nu_col, 1.0, false);
    sol.mu_k = per_candidate(ds.x, dual.mu_k_col, 1.0, false);
    sol.nu_k = per_candidate(ds.x, dual.nu_k_col, 1.0, false);
    for (int i = 0; i < m.n_states; ++i) sol.w[i] = ds.x[dual.w(i)];
    return sol;
}

PhiHat phi_hat(const Mdp& m, const Matrix& q, const Policy& pol, CostTag tag) {
    pol.check_against(m);
    const int n = m.n_states;
    Matrix graph = (q.array() >= kSupportFloor).cast<double>().matrix();
    const Condensation cond = scc_condensation(graph);
    Vector reward(n);
    for (int i = 0; i < n; ++i) reward[i] = mixed_c_tilde(m, i, pol.y().row(i).transpose(), q.row(i).transpose(), tag);
    PhiHat best{-kInf, Vector::Zero(n)};
    for (std::size_t c = 0; c < cond.classes.size(); ++c) {
        if (!cond.successors[c].empty()) continue;
        const auto& cls = cond.classes[c];
        const int k = static_cast<int>(cls.size());
        // pi (Q_C - I) = 0 with one balance equation replaced by the normalization.
        Matrix a(k, k);
        for (int r = 0; r < k; ++r)
            for (int s = 0; s < k; ++s) a(r, s) = q(cls[s], cls[r]) - (r == s ? 1.0 : 0.0);
        a.row(k - 1).setOnes();
        Vector rhs = Vector::Zero(k);
        rhs[k - 1] = 1.0;
        const Vector pi_c = a.fullPivLu().solve(rhs);
        double value = 0.0;
        for (int r = 0; r < k; ++r) value += pi_c[r] * reward[cls[r]];
        if (value > best.value) {
            best.value = value;
            best.pi.setZero();
            for (int r = 0; r < k; ++r) best.pi[cls[r]] = pi_c[r];
        }
    }
    return best;
}

}  // namespace rsmdp
