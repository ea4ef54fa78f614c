#pragma once

#include "rsmdp/model.hpp"

#include <vector>

namespace rsmdp {

/// Maximized value and maximizing kernel row of a KL-penalized linear objective.
struct TiltResult {
    double value = 0.0;
    Vector q_star;
};

/// D(q || p) in nats; +inf when q charges a state p does not.
double kl_divergence(const Vector& q, const Vector& p);

/// cost(i, u) - D(q || p(.|i, u)); -inf off the support of p(.|i, u).
double c_tilde(const Mdp& m, int i, int u, const Vector& q, CostTag tag);

/**
 * max_q [ q.V - D(q || p) ] = log sum_j p_j exp(V_j), attained at q_j ∝ p_j exp(V_j).
 */
TiltResult dv_tilt(const Vector& p, const Vector& V);

/**
 * max_q [ q.V - sum_u y_u D(q || p_u) ].
 *
 * The maximizer is the normalized geometric mixture q_j ∝ exp(V_j) prod_u p_u(j)^{y_u} on the
 * common support of the rows with y_u > 0. Throws ValidationError when that support is empty.
 */
TiltResult mixture_tilt(const Vector& y, const std::vector<Vector>& rows, const Vector& V);

}  // namespace rsmdp
