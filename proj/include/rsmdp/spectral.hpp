#pragma once

#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"

#include <vector>

namespace rsmdp {

enum class KernelCost { PrimaryC, ConstraintK, ProductH };

/**
 * Exponentiated-cost kernel of a stationary policy,
 * `a(i, j) = sum_u y(i, u) * exp(cost(i, u)) * p(j | i, u)`.
 *
 * The stored matrix is scaled by `exp(-log_scale)`; log_scale is nonzero only when some
 * cost exceeds 300, so the true kernel is `exp(log_scale) * a`.
 */
struct MultiplicativeKernel {
    Matrix a;
    double log_scale = 0.0;
    KernelCost cost_tag = KernelCost::PrimaryC;
};

MultiplicativeKernel build_kernel(const Mdp& m, const Policy& pol, CostTag tag);
MultiplicativeKernel build_kernel(const Mdp& m, const Policy& pol, const Matrix& cost,
                                  KernelCost tag = KernelCost::ProductH);

/// Strongly connected components of a support digraph.
struct Condensation {
    /// Reverse topological order: every class appears after all classes it can reach.
    std::vector<std::vector<int>> classes;
    std::vector<int> class_of;
    /// Successor classes (distinct, excluding self) of each class.
    std::vector<std::vector<int>> successors;
};

/// Edge i -> j whenever a(i, j) > 0.
Condensation scc_condensation(const Matrix& a);
inline Condensation scc_condensation(const MultiplicativeKernel& k) { return scc_condensation(k.a); }

/// Period of an irreducible support graph (gcd of cycle lengths).
int class_period(const Matrix& sub);

struct PerronOptions {
    double rel_tol = 1e-12;
    int max_iter = 100000;
};

/// Power-iteration failure; carries the last estimate.
class PerronError : public NumericError {
public:
    PerronError(const std::string& what, double estimate) : NumericError(what), estimate(estimate) {}
    double estimate;
};

/**
 * Spectral radius of a nonnegative irreducible block.
 *
 * Normalized power iteration from the all-ones vector; the growth estimate is the geometric
 * mean of the one-step ratios over a window of one period, so periodic classes converge too.
 */
double perron_root(const Matrix& sub, const PerronOptions& opts = {});

struct SpectralResult {
    /// Per-state log-growth rate.
    Vector lambda;
    std::vector<std::vector<int>> classes;
    /// Per-class Perron root and its log (the log survives overflow-guarded kernels).
    std::vector<double> class_rho;
    std::vector<double> class_log_rho;
    /// States grouped by equal lambda, cells ordered by smallest member.
    std::vector<std::vector<int>> partition;
};

SpectralResult evaluate_kernel(const MultiplicativeKernel& k, const PerronOptions& opts = {});
SpectralResult evaluate_policy(const Mdp& m, const Policy& pol, CostTag tag,
                               const PerronOptions& opts = {});

/// Groups indices whose values agree within tol (transitively, after sorting).
std::vector<std::vector<int>> partition_by_value(const Vector& values, double tol = 1e-9);

}  // namespace rsmdp
