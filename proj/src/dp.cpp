#include "rsmdp/dp.hpp"

#include "rsmdp/spectral.hpp"
#include "rsmdp/variational.hpp"

#include <algorithm>
#include <cmath>

namespace rsmdp {

namespace {

// Ties within this margin go to the lower action index.
constexpr double kTieTol = 1e-10;

// min_u [ c(i,u) + log sum_j p(j|i,u) exp(V_j) ] and its argmin.
std::pair<double, int> bellman_min(const Mdp& m, const Matrix& cost, int i, const Vector& V) {
    double best = kInf;
    int arg = 0;
    for (int u = 0; u < m.n_actions; ++u) {
        const double v = cost(i, u) + dv_tilt(m.p[i].row(u).transpose(), V).value;
        if (v < best - kTieTol) {
            best = v;
            arg = u;
        }
    }
    return {best, arg};
}

double span(const Vector& d) { return d.maxCoeff() - d.minCoeff(); }

// States j in support_union(i) whose Psi is within tol of the largest.
std::vector<int> top_face(const Mdp& m, const Vector& Psi, int i, double tol) {
    const auto supp = support_union(m, i);
    double top = -kInf;
    for (int j : supp) top = std::max(top, Psi[j]);
    std::vector<int> face;
    for (int j : supp)
        if (Psi[j] >= top - tol) face.push_back(j);
    return face;
}

// min_u [ c(i,u) + log sum_{j in face} p(j|i,u) exp(V_j) ], argmin and maximizing q.
struct FaceMin {
    double value = kInf;
    int action = -1;
    Vector q;
};

FaceMin face_min(const Mdp& m, const Matrix& cost, int i, const std::vector<int>& face, const Vector& V) {
    FaceMin out;
    for (int u = 0; u < m.n_actions; ++u) {
        Vector logw = Vector::Constant(m.n_states, -kInf);
        for (int j : face)
            if (m.p[i](u, j) >= kSupportFloor) logw[j] = std::log(m.p[i](u, j)) + V[j];
        const double lse = log_sum_exp(logw);
        const double inner = cost(i, u) + lse;
        if (inner < out.value - 1e-10) {
            out.value = inner;
            out.action = u;
            if (std::isfinite(inner)) out.q = (logw.array() - lse).exp().matrix();
        }
    }
    return out;
}

}  // namespace

void finalize_dp_solution(DpSolution& sol) {
    sol.Lambda = sol.Psi.array().exp().matrix();
    sol.lambda_star = sol.Psi.maxCoeff();
    sol.partition = partition_by_value(sol.Psi, 1e-9);
    sol.zeta.resize(sol.V.size());
    for (const auto& cell : sol.partition) {
        double vmax = -kInf;
        for (int i : cell) vmax = std::max(vmax, sol.V[i]);
        for (int i : cell) sol.zeta[i] = std::exp(sol.V[i] - vmax);
    }
}

DpSolution relative_value_iteration(const Mdp& m, CostTag tag, double tol, int max_iter) {
    const Matrix& cost = m.costs(tag);
    const int n = m.n_states;
    Vector V = Vector::Zero(n);
    Vector T(n);
    DpSolution sol;
    double offset = 0.0;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        for (int i = 0; i < n; ++i) T[i] = bellman_min(m, cost, i, V).first;
        offset = T[0];
        Vector next = T.array() - offset;
        const double s = span(next - V);
        sol.span_history.push_back(s);
        V = std::move(next);
        sol.iterations = it + 1;
        if (s < tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw DpConvergenceError("relative value iteration did not converge in " + std::to_string(max_iter) +
                                     " iterations",
                                 sol.span_history);

    std::vector<int> actions(n);
    sol.residual = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto [val, arg] = bellman_min(m, cost, i, V);
        actions[i] = arg;
        sol.residual = std::max(sol.residual, std::abs(offset + V[i] - val));
    }
    sol.policy = Policy::deterministic(actions, m.n_actions).to_randomized();
    sol.Psi = Vector::Constant(n, offset);
    sol.V = V;
    finalize_dp_solution(sol);

    Matrix support = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j : support_union(m, i)) support(i, j) = 1.0;
    sol.reducible_warning = scc_condensation(support).classes.size() > 1;
    return sol;
}

MultichainReport verify_multichain(const Mdp& m, const Vector& Psi, const Vector& V, double tol, CostTag tag) {
    const int n = m.n_states;
    MultichainReport rep;
    rep.residual_psi = Vector::Zero(n);
    rep.residual_value = Vector::Zero(n);
    rep.argmin_action.assign(n, -1);
    rep.argmax_q.assign(n, Vector::Zero(n));
    rep.face.assign(n, {});
    const Matrix& cost = m.costs(tag);
    for (int i = 0; i < n; ++i) {
        double top = -kInf;
        for (int j : support_union(m, i)) top = std::max(top, Psi[j]);
        rep.residual_psi[i] = std::abs(Psi[i] - top);
        rep.face[i] = top_face(m, Psi, i, tol);

        // The inner max over q supported on the face is a tilt of p restricted to that face.
        const FaceMin fm = face_min(m, cost, i, rep.face[i], V);
        rep.argmin_action[i] = fm.action;
        if (std::isfinite(fm.value)) rep.argmax_q[i] = fm.q;
        rep.residual_value[i] = std::isfinite(fm.value) ? std::abs(Psi[i] + V[i] - fm.value) : kInf;
    }
    rep.max_residual = std::max(rep.residual_psi.maxCoeff(), rep.residual_value.maxCoeff());
    Eigen::Index worst = 0;
    (rep.residual_psi + rep.residual_value).maxCoeff(&worst);
    rep.worst_state = static_cast<int>(worst);
    return rep;
}

Vector tighten_relative_values(const Mdp& m, const Vector& Psi, const Vector& V, double tol, CostTag tag,
                               int max_sweeps) {
    const int n = m.n_states;
    const Matrix& cost = m.costs(tag);
    std::vector<std::vector<int>> faces(n);
    for (int i = 0; i < n; ++i) faces[i] = top_face(m, Psi, i, tol);

    Vector out = V;
    std::vector<int> slack;
    for (int i = 0; i < n; ++i) {
        const double rhs = face_min(m, cost, i, faces[i], out).value;
        if (std::isfinite(rhs) && Psi[i] + out[i] > rhs + tol) slack.push_back(i);
    }
    // Gauss-Seidel on the slack states; each update only lowers V, so the sweep is monotone.
    for (int sweep = 0; sweep < max_sweeps && !slack.empty(); ++sweep) {
        double change = 0.0;
        for (int i : slack) {
            const double next = face_min(m, cost, i, faces[i], out).value - Psi[i];
            change = std::max(change, std::abs(next - out[i]));
            out[i] = next;
        }
        if (change < 1e-14) break;
    }
    return out;
}

}  // namespace rsmdp
