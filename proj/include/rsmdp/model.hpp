#pragma once

#include "rsmdp/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rsmdp {

/// Which per-stage cost a computation runs on.
enum class CostTag { Primary, Constraint };

const char* to_string(CostTag tag);

/**
 * Finite risk-sensitive MDP.
 *
 * `p[i](u, j)` is the probability of moving to j from i under action u, `cost(i, u)` the
 * per-stage cost. The optional constraint cost and its bound are both in log-growth units.
 * Instances are immutable once validated.
 */
struct Mdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Matrix> p;
    Matrix cost;
    std::optional<Matrix> constraint_cost;
    std::optional<double> bound;
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;

    const Matrix& costs(CostTag tag) const;
    bool has_constraint() const { return constraint_cost.has_value(); }
};

/// Throws ValidationError naming the offending index.
void validate(const Mdp& m);

/// Builds and validates an instance from dense arrays; names default to indices.
Mdp make_mdp(std::vector<Matrix> p, Matrix cost, std::optional<Matrix> constraint_cost = {},
             std::optional<double> bound = {});

Mdp load_problem(const std::filesystem::path& path);
Mdp parse_problem(const std::string& json_text);
void save_problem(const Mdp& m, const std::filesystem::path& path);
std::string dump_problem(const Mdp& m);

/// { j : p[i][u][j] > 0 for some u }, in increasing order.
std::vector<int> support_union(const Mdp& m, int i);

/// { j : p[i][u][j] > 0 }, in increasing order.
std::vector<int> support(const Mdp& m, int i, int u);

/// True when every action at every state shares one transition support.
bool has_uniform_supports(const Mdp& m);

/**
 * Stationary policy, deterministic or randomized.
 *
 * Both kinds expose `y()`, the |S| x |A| matrix of action probabilities.
 */
class Policy {
public:
    enum class Kind { Deterministic, Randomized };

    static Policy deterministic(std::vector<int> actions, int n_actions);
    static Policy randomized(Matrix y);

    Kind kind() const { return kind_; }
    int n_states() const { return static_cast<int>(y_.rows()); }
    int n_actions() const { return static_cast<int>(y_.cols()); }
    const Matrix& y() const { return y_; }
    const std::vector<int>& actions() const;

    Policy to_randomized() const { return randomized(y_); }
    /// Highest-probability action per state, lowest index on ties.
    std::vector<int> argmax_actions() const;
    bool is_point_mass(double tol = 1e-12) const;

    /// Throws ValidationError if the policy does not fit m.
    void check_against(const Mdp& m) const;

private:
    Kind kind_ = Kind::Randomized;
    std::vector<int> det_;
    Matrix y_;
};

}  // namespace rsmdp
