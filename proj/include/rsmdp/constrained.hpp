#pragma once

#include "rsmdp/game_lp.hpp"
#include "rsmdp/model.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace rsmdp {

/**
 * Two independent copies of the chain driven by one action: state (i, j) has index i * n + j,
 * rows p(k|i,u) p(l|j,u) and cost c(i,u) + gamma k(j,u).
 */
struct ProductChain {
    Mdp mdp;
    double gamma = 0.0;
    int n_component = 0;

    int index(int i, int j) const { return i * n_component + j; }
};

ProductChain product_chain(const Mdp& m, double gamma);

struct CombinedValues {
    Vector beta;
    Vector V;
};

/// beta(i,j) = beta_i + gamma beta'_j and likewise for V.
CombinedValues combine_values(const Vector& beta, const Vector& V, const Vector& beta_k, const Vector& V_k,
                              double gamma);

/**
 * Program over product states with candidate pairs (q, q') drawn from the component sets:
 *   growth: beta(i,j) >= sum q(k) q'(l) beta(k,l)
 *   value:  V(i,j) + beta(i,j) >= sum q q' V + sum_u y_i(u) c~(i,u,q) + gamma sum_u y_j(u) k~(j,u,q')
 * with one policy y over component states. Minimizes sum beta(i,j).
 */
struct ProductProgram {
    StandardLp lp;
    int n = 0;
    int n_actions = 0;
    int beta(int i, int j) const { return i * n + j; }
    int V(int i, int j) const { return n * n + i * n + j; }
    int y(int i, int u) const { return 2 * n * n + i * n_actions + u; }
};

ProductProgram build_product_lp(const Mdp& m, const CandidateSet& c_cands, const CandidateSet& k_cands, double gamma);

struct ProductCheck {
    double product_optimum = 0.0;
    /// |S| (sum beta + gamma sum beta'), the value of the combined point.
    double combined_objective = 0.0;
    /// Largest violation of the product growth and value rows by the combined point with the component policy.
    double combined_residual = 0.0;
    int worst_row = -1;
    long pivots = 0;
};

/// Solves the product program on the final candidates of a Lagrangian solve and checks the combined point.
ProductCheck check_product(const Mdp& m, const GameSolution& sol, const LpOptions& opts = {});

struct PsiResult {
    double gamma = 0.0;
    double psi = 0.0;
    /// sum beta' - |S| C
    double subgrad = 0.0;
    /// sum_i sum_q' sum_u y_i(u) k~(i,u,q') mu'(i,q') - |S| C
    double subgrad_dual = 0.0;
    GameSolution solution;
};

/// Optimum of the Lagrangian program at gamma and its two subgradient forms; throws when they disagree by more than 1e-6.
PsiResult psi_of_gamma(const Mdp& m, double gamma, const GenerationOptions& opts = {});

struct AscentConfig {
    double gamma0 = 0.0;
    double a0 = 1.0;
    int max_steps = 500;
    int window = 10;
    double tol = 1e-6;
    GenerationOptions generation;
};

struct AscentStep {
    int n = 0;
    double gamma = 0.0;
    double psi = 0.0;
    double subgrad = 0.0;
    double subgrad_dual = 0.0;
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    /// max_i of the constraint growth rate of this step's policy.
    double constraint_value = 0.0;
    Matrix y;
};

struct AscentResult {
    std::vector<AscentStep> trace;
    double gamma = 0.0;
    bool converged = false;
    /// Policy mixed from the last feasible and last infeasible step policies.
    Policy policy;
    double mix_weight = 1.0;
    Vector cost_lambda;
    Vector constraint_lambda;
    /// sum_i of the cost growth rate of the returned policy.
    double objective = 0.0;
    bool feasible = false;
};

/// An LP failure inside the ascent; keeps the steps completed so far.
class AscentError : public NumericError {
public:
    AscentError(const std::string& what, std::vector<AscentStep> trace)
        : NumericError(what), trace(std::move(trace)) {}
    std::vector<AscentStep> trace;
};

/// max(0, gamma + step * g)
inline double projected_step(double gamma, double step, double g) { return std::max(0.0, gamma + step * g); }

/// Gamma_{n+1} = max(0, Gamma_n + a0/(1+n) g(Gamma_n)).
AscentResult subgradient_ascent(const Mdp& m, const AscentConfig& config);

/// Header plus one row per step: n,gamma,psi,subgrad,primal_obj,dual_obj,constraint_value.
void write_ascent_csv(std::ostream& out, const std::vector<AscentStep>& trace);

/**
 * Behavioral mixture w y_a + (1 - w) y_b with w bisected so that max_i lambda_k,i meets the
 * bound; y_a must be feasible and y_b infeasible. Returns the feasible end of the final bracket.
 */
std::pair<Matrix, double> mix_to_bound(const Mdp& m, const Matrix& feasible, const Matrix& infeasible, double tol = 1e-12);

}  // namespace rsmdp
