#include "rsmdp/oracle.hpp"

#include "rsmdp/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <random>
#include <string>

namespace rsmdp {

namespace {

// u <- log(A exp(u)) applied `steps` times, with A the exponentiated-cost kernel.
Vector advance(const Mdp& m, const Policy& pol, CostTag tag, Vector u, int steps) {
    const Matrix& cost = m.costs(tag);
    const Matrix& y = pol.y();
    const int n = m.n_states;
    std::vector<double> terms;
    for (int step = 0; step < steps; ++step) {
        Vector next(n);
        for (int i = 0; i < n; ++i) {
            terms.clear();
            for (int a = 0; a < m.n_actions; ++a) {
                if (y(i, a) <= 0.0) continue;
                for (int j = 0; j < n; ++j) {
                    const double pj = m.p[i](a, j);
                    if (pj > 0.0) terms.push_back(std::log(y(i, a)) + std::log(pj) + cost(i, a) + u[j]);
                }
            }
            next[i] = log_sum_exp(Eigen::Map<const Vector>(terms.data(), static_cast<Eigen::Index>(terms.size())));
        }
        u = std::move(next);
    }
    return u;
}

}  // namespace

Vector finite_horizon_value(const Mdp& m, const Policy& pol, CostTag tag, int horizon) {
    pol.check_against(m);
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    return advance(m, pol, tag, Vector::Zero(m.n_states), horizon);
}

GrowthEstimate growth_rate_estimate(const Mdp& m, const Policy& pol, CostTag tag, int horizon) {
    pol.check_against(m);
    if (horizon < 100) throw ValidationError("growth estimate needs a horizon of at least 100");
    const int delta = (horizon + 9) / 10;
    const Vector early = advance(m, pol, tag, Vector::Zero(m.n_states), horizon - delta);
    const Vector late = advance(m, pol, tag, early, delta);
    GrowthEstimate out;
    out.horizon = horizon;
    out.estimate = late / horizon;
    out.tail_slope = (late - early) / delta;
    return out;
}

Vector oracle_growth_rates(const Mdp& m, const Policy& pol, CostTag tag) {
    pol.check_against(m);
    const Matrix& cost = m.costs(tag);
    const Matrix& y = pol.y();
    const int n = m.n_states;
    // Shifting every cost by the maximum shifts every rate by the same amount.
    const double shift = cost.maxCoeff();
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int u = 0; u < m.n_actions; ++u)
            if (y(i, u) > 0.0) a.row(i) += y(i, u) * std::exp(cost(i, u) - shift) * m.p[i].row(u);

    // Transitive closure by Warshall.
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) reach[i][j] = a(i, j) > 0.0;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            if (reach[i][k])
                for (int j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = 1;

    Vector rho(n);
    std::vector<char> done(n, 0);
    for (int i = 0; i < n; ++i) {
        if (done[i]) continue;
        std::vector<int> cls{i};
        for (int j = i + 1; j < n; ++j)
            if (reach[i][j] && reach[j][i]) cls.push_back(j);
        const int k = static_cast<int>(cls.size());
        Matrix sub(k, k);
        for (int r = 0; r < k; ++r)
            for (int s = 0; s < k; ++s) sub(r, s) = a(cls[r], cls[s]);
        double radius;
        if (k == 1) {
            radius = sub(0, 0);
        } else {
            Eigen::EigenSolver<Matrix> es(sub, false);
            radius = es.eigenvalues().cwiseAbs().maxCoeff();
        }
        for (int j : cls) {
            rho[j] = radius;
            done[j] = 1;
        }
    }
    Vector lambda(n);
    for (int i = 0; i < n; ++i) {
        double best = rho[i];
        for (int j = 0; j < n; ++j)
            if (reach[i][j]) best = std::max(best, rho[j]);
        lambda[i] = std::log(best) + shift;
    }
    return lambda;
}

std::vector<int> decode_policy(int index, int n_states, int n_actions) {
    std::vector<int> act(n_states);
    for (int i = 0; i < n_states; ++i) {
        act[i] = index % n_actions;
        index /= n_actions;
    }
    return act;
}

EnumerationReport enumerate_policies(const Mdp& m, CostTag tag) {
    long count = 1;
    for (int i = 0; i < m.n_states; ++i) {
        count *= m.n_actions;
        if (count > kEnumerationGuard)
            throw GuardError("enumeration needs " + std::to_string(m.n_actions) + "^" + std::to_string(m.n_states) +
                             " policies, above the limit of " + std::to_string(kEnumerationGuard));
    }
    EnumerationReport out;
    out.n_policies = static_cast<int>(count);
    out.table.resize(count, m.n_states);
    for (int p = 0; p < out.n_policies; ++p) {
        const Policy pol = Policy::deterministic(decode_policy(p, m.n_states, m.n_actions), m.n_actions);
        out.table.row(p) = oracle_growth_rates(m, pol, tag).transpose();
    }
    out.min_lambda.resize(m.n_states);
    out.argmin.assign(m.n_states, 0);
    for (int i = 0; i < m.n_states; ++i) {
        Eigen::Index best;
        out.min_lambda[i] = out.table.col(i).minCoeff(&best);
        out.argmin[i] = static_cast<int>(best);
    }
    Eigen::Index top;
    out.lambda_star = out.min_lambda.maxCoeff(&top);
    out.argmax_state = static_cast<int>(top);
    return out;
}

MonteCarloEstimate monte_carlo_cost(const Mdp& m, const Policy& pol, CostTag tag, int start, int horizon, int n_paths,
                                    std::uint64_t seed) {
    pol.check_against(m);
    if (start < 0 || start >= m.n_states) throw ValidationError("start state out of range");
    if (horizon < 1 || n_paths < 2) throw ValidationError("Monte Carlo needs horizon >= 1 and at least 2 paths");
    const Matrix& cost = m.costs(tag);
    const Matrix& y = pol.y();
    std::mt19937_64 rng(seed);
    auto draw = [&](auto&& prob, int size) {
        const double r = std::generate_canonical<double, 64>(rng);
        double acc = 0.0;
        int last = 0;
        for (int k = 0; k < size; ++k) {
            const double pk = prob(k);
            if (pk <= 0.0) continue;
            last = k;
            acc += pk;
            if (r < acc) return k;
        }
        return last;
    };
    std::vector<double> sums(n_paths);
    for (int path = 0; path < n_paths; ++path) {
        int s = start;
        double total = 0.0;
        for (int t = 0; t < horizon; ++t) {
            const int u = draw([&](int k) { return y(s, k); }, m.n_actions);
            total += cost(s, u);
            const int row = s;
            s = draw([&](int k) { return m.p[row](u, k); }, m.n_states);
        }
        sums[path] = total;
    }
    const Eigen::Map<const Vector> sv(sums.data(), n_paths);
    const double top = sv.maxCoeff();
    const Vector w = (sv.array() - top).exp().matrix();
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / (n_paths - 1);
    MonteCarloEstimate out;
    out.horizon = horizon;
    out.n_paths = n_paths;
    out.estimate = (top + std::log(mean)) / horizon;
    out.half_width = 1.96 * std::sqrt(var / n_paths) / mean / horizon;
    return out;
}

long grid_size(int n_states, int n_actions, int mesh) {
    // C(mesh + A - 1, A - 1) points per state.
    double per_state = 1.0;
    for (int k = 1; k < n_actions; ++k) per_state = per_state * (mesh + k) / k;
    double total = 1.0;
    for (int i = 0; i < n_states; ++i) {
        total *= per_state;
        if (total > static_cast<double>(kGridGuard)) return -1;
    }
    return std::lround(total);
}

GridResult constrained_grid_search(const Mdp& m, int mesh) {
    if (!m.has_constraint() || !m.bound) throw ValidationError("grid search needs a constraint cost and bound");
    if (mesh < 1) throw ValidationError("mesh must be positive");
    const long size = grid_size(m.n_states, m.n_actions, mesh);
    if (size < 0)
        throw GuardError("grid with mesh " + std::to_string(mesh) + " exceeds " + std::to_string(kGridGuard) + " policies");

    // All action distributions with entries in multiples of 1/mesh, in lexicographic order.
    std::vector<Vector> simplex;
    std::vector<int> parts(m.n_actions, 0);
    std::function<void(int, int)> fill = [&](int a, int left) {
        if (a == m.n_actions - 1) {
            parts[a] = left;
            Vector v(m.n_actions);
            for (int k = 0; k < m.n_actions; ++k) v[k] = static_cast<double>(parts[k]) / mesh;
            simplex.push_back(v);
            return;
        }
        for (int x = left; x >= 0; --x) {
            parts[a] = x;
            fill(a + 1, left - x);
        }
    };
    fill(0, mesh);

    const double bound = *m.bound;
    GridResult out;
    out.n_points = size;
    out.objective = kInf;
    std::vector<int> idx(m.n_states, 0);
    Matrix y(m.n_states, m.n_actions);
    const int per_state = static_cast<int>(simplex.size());
    for (long p = 0; p < size; ++p) {
        for (int i = 0; i < m.n_states; ++i) y.row(i) = simplex[idx[i]].transpose();
        const Policy pol = Policy::randomized(y);
        const Vector lk = evaluate_policy(m, pol, CostTag::Constraint).lambda;
        if (lk.maxCoeff() <= bound) {
            ++out.n_feasible;
            const Vector lc = evaluate_policy(m, pol, CostTag::Primary).lambda;
            if (lc.sum() < out.objective) {
                out.feasible = true;
                out.objective = lc.sum();
                out.y = y;
                out.cost_lambda = lc;
                out.constraint_lambda = lk;
            }
        }
        for (int i = 0; i < m.n_states; ++i) {
            if (++idx[i] < per_state) break;
            idx[i] = 0;
        }
    }
    if (!out.feasible) out.objective = kInf;
    return out;
}

}  // namespace rsmdp
