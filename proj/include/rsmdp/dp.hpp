#pragma once

#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

#include <string>
#include <vector>

namespace rsmdp {

/**
 * Solution of the multiplicative dynamic programming equation.
 *
 * Psi holds per-state log growth values, V relative values; zeta = exp(V) is normalized to
 * max 1 within each partition cell and Lambda = exp(Psi).
 */
struct DpSolution {
    Vector Psi;
    Vector V;
    Vector zeta;
    Vector Lambda;
    double lambda_star = 0.0;
    Policy policy;
    std::vector<std::vector<int>> partition;
    int iterations = 0;
    std::vector<double> span_history;
    /// max_i | Psi_i + V_i - min_u (c + log sum_j p e^V) |
    double residual = 0.0;
    /// Set when the union support graph is not strongly connected.
    bool reducible_warning = false;
};

class DpConvergenceError : public NumericError {
public:
    DpConvergenceError(const std::string& what, std::vector<double> history)
        : NumericError(what), span_history(std::move(history)) {}
    std::vector<double> span_history;
};

/// Fills zeta, Lambda, lambda_star and partition from Psi and V.
void finalize_dp_solution(DpSolution& sol);

/**
 * Relative value iteration
 *     V_{n+1}(i) = min_u [ c(i,u) + log sum_j p(j|i,u) exp(V_n(j)) ] - offset_n,
 * with the offset taken at state 0. Intended for irreducible aperiodic models.
 */
DpSolution relative_value_iteration(const Mdp& m, CostTag tag, double tol = 1e-12, int max_iter = 100000);

struct MultichainReport {
    double max_residual = 0.0;
    /// |Psi_i - max_{j in support_union(i)} Psi_j|
    Vector residual_psi;
    /// |Psi_i + V_i - min_u max_{q in B_i} [c~(i,u,q) + q.V]|
    Vector residual_value;
    std::vector<int> argmin_action;
    std::vector<Vector> argmax_q;
    /// The face of B_i: states j in support_union(i) with Psi_j within tol of the maximum.
    std::vector<std::vector<int>> face;
    int worst_state = -1;
};

/// Residual check of the multichain optimality equations for a candidate (Psi, V).
MultichainReport verify_multichain(const Mdp& m, const Vector& Psi, const Vector& V, double tol = 1e-7,
                                   CostTag tag = CostTag::Primary);

/**
 * The primal program only bounds V from above where its value rows are slack (typically at
 * transient states). Lowers V at states where Psi_i + V_i exceeds the right-hand side of (b)
 * by more than tol, iterating those states to a fixed point with Psi and all other V_j held.
 */
Vector tighten_relative_values(const Mdp& m, const Vector& Psi, const Vector& V, double tol = 1e-7,
                               CostTag tag = CostTag::Primary, int max_sweeps = 100000);

}  // namespace rsmdp
