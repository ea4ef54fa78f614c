#pragma once

#include "rsmdp/types.hpp"

namespace rsmdp {

/**
 * Dense linear program
 *
 *     minimize   objective.x + constant
 *     subject to a_eq x  = b_eq
 *                a_ge x >= b_ge
 *                lower <= x <= upper
 *
 * with each lower bound either 0 or -inf and each upper bound finite or +inf.
 */
struct StandardLp {
    Vector objective;
    double constant = 0.0;
    Matrix a_eq;
    Vector b_eq;
    Matrix a_ge;
    Vector b_ge;
    Vector lower;
    Vector upper;

    int n_vars() const { return static_cast<int>(objective.size()); }

    /// Allocates an empty program over n nonnegative variables.
    static StandardLp with_vars(int n);
    void check() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus s);

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Vector x;
    double objective_value = 0.0;
    /// Multipliers: dual_ge >= 0; the dual objective is b_eq.dual_eq + b_ge.dual_ge + bound terms.
    Vector dual_eq;
    Vector dual_ge;
    double dual_objective = 0.0;
    /// Certificate residuals, filled for Optimal returns.
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double complementarity = 0.0;
    long pivots = 0;
};

struct LpOptions {
    double pivot_tol = 1e-10;
    double cost_tol = 1e-10;
    double feasibility_tol = 1e-8;
    /// Optimal solutions whose certificate residuals exceed this raise NumericError.
    double certificate_tol = 1e-6;
};

/**
 * Two-phase dense-tableau primal simplex with Bland's rule.
 *
 * The final basis is re-solved with an LU factorization before the certificate is computed.
 * Throws NumericError when the pivot budget 10 (rows + cols)^2 is exhausted.
 */
LpSolution solve_lp(const StandardLp& lp, const LpOptions& opts = {});

}  // namespace rsmdp
