#include "rsmdp/variational.hpp"

#include "rsmdp/errors.hpp"

namespace rsmdp {

namespace {

// Probabilities this small are dropped from tilt normalizers.
constexpr double kTiltFloor = 1e-300;

TiltResult normalize_log_weights(const Vector& logw) {
    TiltResult out;
    out.value = log_sum_exp(logw);
    out.q_star = (logw.array() - out.value).exp().matrix();
    for (Eigen::Index j = 0; j < out.q_star.size(); ++j)
        if (out.q_star[j] < kTiltFloor) out.q_star[j] = 0.0;
    out.q_star /= out.q_star.sum();
    return out;
}

}  // namespace

double kl_divergence(const Vector& q, const Vector& p) {
    if (q.size() != p.size()) throw ValidationError("kl_divergence: length mismatch");
    double d = 0.0;
    for (Eigen::Index j = 0; j < q.size(); ++j) {
        if (q[j] <= 0.0) continue;
        if (p[j] < kSupportFloor) return kInf;
        d += q[j] * std::log(q[j] / p[j]);
    }
    return std::max(d, 0.0);
}

double c_tilde(const Mdp& m, int i, int u, const Vector& q, CostTag tag) {
    const double d = kl_divergence(q, m.p[i].row(u).transpose());
    return std::isinf(d) ? -kInf : m.costs(tag)(i, u) - d;
}

TiltResult dv_tilt(const Vector& p, const Vector& V) {
    if (p.size() != V.size()) throw ValidationError("dv_tilt: length mismatch");
    Vector logw(p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j)
        logw[j] = p[j] >= kSupportFloor ? std::log(p[j]) + V[j] : -kInf;
    return normalize_log_weights(logw);
}

TiltResult mixture_tilt(const Vector& y, const std::vector<Vector>& rows, const Vector& V) {
    if (static_cast<std::size_t>(y.size()) != rows.size())
        throw ValidationError("mixture_tilt: one row per action required");
    Vector logw = V;
    for (std::size_t u = 0; u < rows.size(); ++u) {
        if (rows[u].size() != V.size()) throw ValidationError("mixture_tilt: length mismatch");
        const double w = y[static_cast<Eigen::Index>(u)];
        if (w <= 0.0) continue;
        for (Eigen::Index j = 0; j < V.size(); ++j)
            logw[j] = rows[u][j] >= kSupportFloor ? logw[j] + w * std::log(rows[u][j]) : -kInf;
    }
    if (!std::isfinite(logw.maxCoeff())) throw ValidationError("mixture_tilt: empty common support");
    return normalize_log_weights(logw);
}

}  // namespace rsmdp
