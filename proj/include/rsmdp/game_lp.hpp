#pragma once

#include "rsmdp/errors.hpp"
#include "rsmdp/lp.hpp"
#include "rsmdp/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rsmdp {

enum class CandidateSource { Vertex, Tilt, MixtureTilt, Seed };

const char* to_string(CandidateSource s);

struct Candidate {
    Vector q;
    CandidateSource source = CandidateSource::Seed;
};

/// Finite per-state lists of kernel rows standing in for the full admissible simplex.
struct CandidateSet {
    std::vector<std::vector<Candidate>> rows;

    int n_states() const { return static_cast<int>(rows.size()); }
    int total() const;
    /// Appends unless an existing row lies within L1 distance 1e-9; returns whether it was added.
    bool add(int i, Vector q, CandidateSource source);
};

/// Rows p(.|i,u), admissible vertices and `n_random` seeded random admissible rows per state.
CandidateSet seed_candidates(const Mdp& m, int n_random = 8, std::uint64_t seed = 0);

/**
 * Variable and row bookkeeping of the primal program.
 *
 * Columns: beta, V, then y (absent when the policy is fixed), then beta', V' for the
 * Lagrangian program. Rows of `lp.a_ge` come in (P1, P2) pairs per candidate, c-block first.
 */
struct PrimalProgram {
    StandardLp lp;
    int n = 0;
    int n_actions = 0;
    bool has_y = true;
    bool lagrangian = false;
    double gamma = 0.0;

    int beta(int i) const { return i; }
    int V(int i) const { return n + i; }
    int y(int i, int u) const { return 2 * n + i * n_actions + u; }
    int beta_k(int i) const { return 2 * n + (has_y ? n * n_actions : 0) + i; }
    int V_k(int i) const { return beta_k(0) + n + i; }

    /// Row offset of the first growth row of candidate k at state i in the given block.
    std::vector<std::vector<int>> row_c;
    std::vector<std::vector<int>> row_k;
};

/// Sum_u y(i,u) cost~(i,u,q); throws std::logic_error on an inadmissible q.
double mixed_c_tilde(const Mdp& m, int i, const Vector& y_row, const Vector& q, CostTag tag);

/**
 * Primal program: minimize sum beta subject to
 *   growth rows beta_i >= q.beta and value rows V_i + beta_i >= sum_u y_i(u) c~(i,u,q) + q.V per candidate,
 *   y_i >= 0, sum_u y_i(u) = 1.
 * With gamma a k-block of growth and value rows is added on (beta', V') with the same y, the objective
 * gains gamma * sum beta' and the constant -gamma |S| C.
 * With `fixed_y` the policy enters as data instead of variables.
 */
PrimalProgram build_primal(const Mdp& m, const CandidateSet& cands, CostTag tag,
                           const std::optional<Matrix>& fixed_y = {});
PrimalProgram build_primal(const Mdp& m, const CandidateSet& c_cands, const CandidateSet& k_cands, double gamma);

/**
 * Dual program over mu, nu >= 0 per candidate and free w, maximize sum w (built as
 * minimization of -sum w):
 *   balance sum mu(i,q)(delta_ij - q_j) = 0, flow sum nu(i,q)(delta_ij - q_j) + sum_q mu(j,q) = 1,
 *   and the action rows sum_q c~(i,u,q) mu(i,q) - w_i >= 0 for every (i,u).
 * With gamma, mu', nu' carry balance and flow on the k-candidates and the action row becomes
 *   sum c~ mu + gamma sum k~ mu' - w_i >= gamma C.
 */
struct DualProgram {
    StandardLp lp;
    int n = 0;
    bool lagrangian = false;
    /// Column of mu / nu for candidate k at state i, per block.
    std::vector<std::vector<int>> mu_col, nu_col, mu_k_col, nu_k_col;
    int w(int i) const { return w_offset + i; }
    int w_offset = 0;
};

DualProgram build_dual(const Mdp& m, const CandidateSet& cands, CostTag tag);
DualProgram build_dual(const Mdp& m, const CandidateSet& c_cands, const CandidateSet& k_cands, double gamma);

struct Violation {
    int state = 0;
    Vector q;
    double amount = 0.0;
    CandidateSource source = CandidateSource::Vertex;
    /// False for the constraint (k) block of a Lagrangian program.
    bool primary_block = true;
};

/**
 * Most violated growth and value rows per state over the full admissible simplex:
 * a vertex for the growth row, the geometric-mixture tilt for the value row. Emits those above eps.
 */
std::vector<Violation> separation_oracle(const Mdp& m, const Vector& beta, const Vector& V, const Matrix& y,
                                         CostTag tag, double eps = 1e-9);

struct GenerationOptions {
    double eps = 1e-9;
    int max_rounds = 200;
    int n_random = 8;
    std::uint64_t seed = 0;
    LpOptions lp;
};

struct GameSolution {
    Vector beta;
    Vector V;
    Policy policy;
    /// Multipliers from the final dual solve, one entry per stored candidate.
    std::vector<Vector> mu, nu;
    Vector w;
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double gap = 0.0;
    int rounds = 0;
    double max_violation = 0.0;
    long pivots = 0;
    CandidateSet candidates;

    /// Lagrangian solves only.
    std::optional<double> gamma;
    Vector beta_k, V_k;
    std::vector<Vector> mu_k, nu_k;
    /// Multipliers of the primal k-block value rows divided by gamma; empty when gamma is 0.
    std::vector<Vector> mu_k_primal;
    CandidateSet k_candidates;

    double lambda_star() const { return beta.maxCoeff(); }
};

/// Generation stopped with violations above eps; carries the best solution so far.
class GenerationError : public NumericError {
public:
    GenerationError(const std::string& what, GameSolution best)
        : NumericError(what), best(std::move(best)) {}
    GameSolution best;
};

/**
 * Constraint generation on the primal program until no candidate row is violated by more
 * than eps, followed by a dual solve on the final candidates.
 * Requires every action at a state to share one transition support.
 */
GameSolution solve_with_generation(const Mdp& m, CostTag tag, const GenerationOptions& opts = {});

/// Same loop with the policy held fixed; beta then gives the per-state value of that policy in the game.
GameSolution solve_fixed_policy(const Mdp& m, const Matrix& y, CostTag tag, const GenerationOptions& opts = {});

/// Lagrangian program at gamma with candidate generation on both blocks.
GameSolution solve_lagrangian(const Mdp& m, double gamma, const GenerationOptions& opts = {});

struct PhiHat {
    double value = 0.0;
    Vector pi;
};

/**
 * max over invariant distributions pi of the kernel q of sum_i pi(i) sum_u y_i(u) c~(i,u,q_i).
 * `q` holds one admissible row per state.
 */
PhiHat phi_hat(const Mdp& m, const Matrix& q, const Policy& pol, CostTag tag);

}  // namespace rsmdp
