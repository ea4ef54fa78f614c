#include "rsmdp/lp.hpp"

#include "rsmdp/errors.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace rsmdp {

StandardLp StandardLp::with_vars(int n) {
    StandardLp lp;
    lp.objective = Vector::Zero(n);
    lp.a_eq = Matrix::Zero(0, n);
    lp.b_eq = Vector::Zero(0);
    lp.a_ge = Matrix::Zero(0, n);
    lp.b_ge = Vector::Zero(0);
    lp.lower = Vector::Zero(n);
    lp.upper = Vector::Constant(n, kInf);
    return lp;
}

void StandardLp::check() const {
    const Eigen::Index n = objective.size();
    if (a_eq.cols() != n || a_ge.cols() != n || lower.size() != n || upper.size() != n)
        throw ValidationError("StandardLp: column count mismatch");
    if (a_eq.rows() != b_eq.size() || a_ge.rows() != b_ge.size())
        throw ValidationError("StandardLp: row count mismatch");
    if (!objective.allFinite() || !a_eq.allFinite() || !a_ge.allFinite() || !b_eq.allFinite() ||
        !b_ge.allFinite())
        throw ValidationError("StandardLp: non-finite coefficient");
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(lower[j] == 0.0 || lower[j] == -kInf))
            throw ValidationError("StandardLp: lower bound must be 0 or -inf");
        if (std::isnan(upper[j]) || upper[j] == -kInf)
            throw ValidationError("StandardLp: bad upper bound");
    }
}

const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

namespace {

// Row of the standardized system and how it maps back.
enum class RowKind { Eq, Ge, UpperBound };

struct Standardized {
    Matrix a;  // m x n_std (structural + surplus), rows sign-normalized so b >= 0
    Vector b;
    Vector cost;
    std::vector<RowKind> kind;
    std::vector<int> source;  // original row index, or variable index for UpperBound rows
    std::vector<double> sign;
    std::vector<int> plus_col, minus_col;  // per original variable; minus_col = -1 when nonnegative
};

Standardized standardize(const StandardLp& lp) {
    Standardized s;
    const int n = lp.n_vars();
    int ncol = 0;
    s.plus_col.resize(n);
    s.minus_col.assign(n, -1);
    for (int j = 0; j < n; ++j) {
        s.plus_col[j] = ncol++;
        if (lp.lower[j] == -kInf) s.minus_col[j] = ncol++;
    }
    std::vector<int> bounded;
    for (int j = 0; j < n; ++j)
        if (std::isfinite(lp.upper[j])) bounded.push_back(j);

    const int m_eq = static_cast<int>(lp.a_eq.rows());
    const int m_ge = static_cast<int>(lp.a_ge.rows());
    const int m = m_eq + m_ge + static_cast<int>(bounded.size());
    const int n_surplus = m - m_eq;
    const int n_std = ncol + n_surplus;
    s.a = Matrix::Zero(m, n_std);
    s.b = Vector::Zero(m);
    s.cost = Vector::Zero(n_std);
    for (int j = 0; j < n; ++j) {
        s.cost[s.plus_col[j]] = lp.objective[j];
        if (s.minus_col[j] >= 0) s.cost[s.minus_col[j]] = -lp.objective[j];
    }
    auto put_row = [&](int r, const auto& coeffs, double rhs) {
        for (int j = 0; j < n; ++j) {
            s.a(r, s.plus_col[j]) = coeffs[j];
            if (s.minus_col[j] >= 0) s.a(r, s.minus_col[j]) = -coeffs[j];
        }
        s.b[r] = rhs;
    };
    int r = 0;
    for (int k = 0; k < m_eq; ++k, ++r) {
        put_row(r, lp.a_eq.row(k), lp.b_eq[k]);
        s.kind.push_back(RowKind::Eq);
        s.source.push_back(k);
    }
    int surplus = ncol;
    for (int k = 0; k < m_ge; ++k, ++r) {
        put_row(r, lp.a_ge.row(k), lp.b_ge[k]);
        s.a(r, surplus++) = -1.0;
        s.kind.push_back(RowKind::Ge);
        s.source.push_back(k);
    }
    for (int j : bounded) {
        Vector e = Vector::Zero(n);
        e[j] = -1.0;
        put_row(r, e, -lp.upper[j]);
        s.a(r, surplus++) = -1.0;
        s.kind.push_back(RowKind::UpperBound);
        s.source.push_back(j);
        ++r;
    }
    s.sign.assign(m, 1.0);
    for (int k = 0; k < m; ++k) {
        if (s.b[k] < 0.0) {
            s.a.row(k) *= -1.0;
            s.b[k] = -s.b[k];
            s.sign[k] = -1.0;
        }
    }
    return s;
}

// Simplex on the basis [A | I] with the basis matrix refactorized before every pivot. The
// tableau is never updated in place, so roundoff cannot accumulate across pivots; for the
// sizes handled here a fresh LU costs less than the pricing pass.
class Tableau {
public:
    Tableau(const Standardized& s, const LpOptions& opts)
        : opts_(opts), m_(static_cast<int>(s.a.rows())), n_std_(static_cast<int>(s.a.cols())) {
        a_ = Matrix::Zero(m_, n_std_ + m_);
        a_.leftCols(n_std_) = s.a;
        a_.rightCols(m_).setIdentity();
        b_ = s.b;
        basis_.resize(m_);
        in_basis_.assign(n_std_ + m_, false);
        for (int r = 0; r < m_; ++r) {
            basis_[r] = n_std_ + r;
            in_basis_[n_std_ + r] = true;
        }
        const long dim = m_ + n_std_;
        pivot_budget_ = 10 * dim * dim + 100;
        refresh();
    }

    void set_phase1_costs() {
        cost_ = Vector::Zero(n_std_ + m_);
        cost_.tail(m_).setOnes();
        refresh();
    }

    void set_phase2_costs(const Vector& cost) {
        cost_ = Vector::Zero(n_std_ + m_);
        cost_.head(n_std_) = cost;
        phase2_ = true;
        refresh();
    }

    double objective() const {
        double v = 0.0;
        for (int r = 0; r < m_; ++r) v += cost_[basis_[r]] * xb_[r];
        return v;
    }

    // Bland's rule over columns [0, limit): lowest-index improving column enters, and among
    // minimum-ratio rows the one with the lowest basic index leaves. Returns false on
    // unboundedness.
    bool run(int limit) {
        for (;;) {
            bool moved = false;
            for (int j = 0; j < limit && !moved; ++j) {
                if (in_basis_[j] || rc_[j] >= -opts_.cost_tol) continue;
                const Vector d = binv_ * a_.col(j);
                const int leave = ratio_test(d);
                if (leave >= 0) {
                    // A pivot that leaves a numerically singular basis is refused; the scan
                    // moves on to the next improving column.
                    moved = pivot(leave, j);
                    continue;
                }
                if (rc_[j] < -kUnboundedTol) return false;
                // Reduced cost at roundoff level on a column without a pivot row.
            }
            if (!moved) return true;
        }
    }

    // Pivots basic artificials out where possible; leftover rows are redundant and stay at 0.
    void expel_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (basis_[r] < n_std_) continue;
            const Vector row = (binv_.row(r) * a_.leftCols(n_std_)).transpose();
            int col = -1;
            double mag = 1e-7;
            for (int j = 0; j < n_std_; ++j) {
                if (!in_basis_[j] && std::abs(row[j]) > mag) {
                    mag = std::abs(row[j]);
                    col = j;
                }
            }
            if (col >= 0) pivot(r, col);
        }
        for (int r = 0; r < m_; ++r)
            if (basis_[r] >= n_std_) xb_[r] = 0.0;
    }

    const std::vector<int>& basis() const { return basis_; }
    double value(int r) const { return xb_[r]; }
    long pivots() const { return pivots_; }

private:
    static constexpr double kUnboundedTol = 1e-7;
    static constexpr double kTieTol = 1e-9;
    static constexpr double kStableRatio = 1e-3;
    static constexpr double kSingularTol = 1e-12;

    // Bounded two-pass ratio test. Pass one finds the largest step that keeps every basic
    // variable above -feasibility_tol; pass two drops rows whose pivot is tiny next to the
    // largest admissible one, then takes the minimum ratio with ties to the lowest basic index.
    // Returns -1 when the column has no pivot.
    int ratio_test(const Vector& d) const {
        const double feas = opts_.feasibility_tol;
        std::vector<double> piv(m_, 0.0);
        double theta_max = kInf;
        for (int r = 0; r < m_; ++r) {
            // A basic artificial must not move off zero in phase 2.
            const bool pinned = phase2_ && basis_[r] >= n_std_;
            const double a = pinned ? std::abs(d[r]) : d[r];
            if (a <= opts_.pivot_tol) continue;
            piv[r] = a;
            const double x = pinned ? 0.0 : std::max(xb_[r], 0.0);
            theta_max = std::min(theta_max, (x + feas) / a);
        }
        double big = 0.0;
        for (int r = 0; r < m_; ++r) {
            if (piv[r] == 0.0) continue;
            const bool pinned = phase2_ && basis_[r] >= n_std_;
            const double x = pinned ? 0.0 : std::max(xb_[r], 0.0);
            if (x / piv[r] <= theta_max) big = std::max(big, piv[r]);
        }
        if (big == 0.0) return -1;
        int leave = -1;
        double best = kInf;
        for (int r = 0; r < m_; ++r) {
            if (piv[r] < kStableRatio * big) continue;
            const bool pinned = phase2_ && basis_[r] >= n_std_;
            const double x = pinned ? 0.0 : std::max(xb_[r], 0.0);
            const double ratio = x / piv[r];
            if (ratio > theta_max) continue;
            const double tie = kTieTol * (1.0 + std::abs(best));
            if (leave < 0 || ratio < best - tie) {
                best = ratio;
                leave = r;
            } else if (ratio <= best + tie && basis_[r] < basis_[leave]) {
                leave = r;
            }
        }
        return leave;
    }

    bool pivot(int r, int c) {
        if (++pivots_ > pivot_budget_)
            throw NumericError("simplex stalled: pivot budget " + std::to_string(pivot_budget_) + " exhausted");
        const int out = basis_[r];
        basis_[r] = c;
        if (!refresh()) {
            basis_[r] = out;
            return false;
        }
        in_basis_[out] = false;
        in_basis_[c] = true;
        return true;
    }

    bool refresh() {
        if (m_ == 0) {
            rc_ = cost_;
            xb_.resize(0);
            return true;
        }
        Matrix bmat(m_, m_);
        Vector cb(m_);
        for (int r = 0; r < m_; ++r) {
            bmat.col(r) = a_.col(basis_[r]);
            cb[r] = cost_.size() ? cost_[basis_[r]] : 0.0;
        }
        Eigen::FullPivLU<Matrix> lu(bmat);
        lu.setThreshold(kSingularTol);
        if (lu.rank() < m_) return false;
        binv_ = lu.inverse();
        xb_ = binv_ * b_;
        // Roundoff below the feasibility tolerance would otherwise turn into negative ratios.
        for (int r = 0; r < m_; ++r)
            if (xb_[r] < 0.0 && xb_[r] > -opts_.feasibility_tol) xb_[r] = 0.0;
        if (cost_.size() == 0) return true;
        const Vector y = binv_.transpose() * cb;
        rc_ = cost_ - a_.transpose() * y;
        for (int r = 0; r < m_; ++r) rc_[basis_[r]] = 0.0;
        return true;
    }

    LpOptions opts_;
    int m_;
    int n_std_;
    Matrix a_;
    Vector b_;
    Vector cost_;
    Vector xb_, rc_;
    Matrix binv_;
    std::vector<int> basis_;
    std::vector<bool> in_basis_;
    bool phase2_ = false;
    long pivots_ = 0;
    long pivot_budget_ = 0;
};

// Core two-phase solve; fills x, dual_eq, dual_ge and the upper-bound duals.
struct RawSolution {
    LpStatus status = LpStatus::Infeasible;
    Vector x, dual_eq, dual_ge, bound_dual;
    long pivots = 0;
};

RawSolution solve_tableau(const StandardLp& lp, const LpOptions& opts);

// Drops linearly dependent equality rows before the tableau sees them; their multipliers are 0.
RawSolution solve_primal(const StandardLp& lp, const LpOptions& opts) {
    const Eigen::Index me = lp.a_eq.rows();
    if (me == 0) return solve_tableau(lp, opts);
    Eigen::ColPivHouseholderQR<Matrix> qr(lp.a_eq.transpose());
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    if (rank == me) return solve_tableau(lp, opts);

    Matrix augmented(me, lp.a_eq.cols() + 1);
    augmented << lp.a_eq, lp.b_eq;
    Eigen::ColPivHouseholderQR<Matrix> qr_aug(augmented.transpose());
    qr_aug.setThreshold(1e-10);
    if (qr_aug.rank() > rank) return RawSolution{};

    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < rank; ++k) keep.push_back(qr.colsPermutation().indices()[k]);
    std::sort(keep.begin(), keep.end());
    StandardLp reduced = lp;
    reduced.a_eq.resize(rank, lp.a_eq.cols());
    reduced.b_eq.resize(rank);
    for (Eigen::Index k = 0; k < rank; ++k) {
        reduced.a_eq.row(k) = lp.a_eq.row(keep[k]);
        reduced.b_eq[k] = lp.b_eq[keep[k]];
    }
    RawSolution sol = solve_tableau(reduced, opts);
    if (sol.status == LpStatus::Optimal) {
        Vector full = Vector::Zero(me);
        for (Eigen::Index k = 0; k < rank; ++k) full[keep[k]] = sol.dual_eq[k];
        sol.dual_eq = std::move(full);
    }
    return sol;
}

RawSolution solve_tableau(const StandardLp& lp, const LpOptions& opts) {
    const Standardized s = standardize(lp);
    const int m = static_cast<int>(s.a.rows());
    const int n_std = static_cast<int>(s.a.cols());
    Tableau tab(s, opts);

    RawSolution sol;
    tab.set_phase1_costs();
    tab.run(n_std + m);
    const double b_scale = std::max(1.0, m > 0 ? s.b.cwiseAbs().maxCoeff() : 0.0);
    if (tab.objective() > opts.feasibility_tol * b_scale) {
        sol.pivots = tab.pivots();
        return sol;
    }
    tab.expel_artificials();
    tab.set_phase2_costs(s.cost);
    const bool bounded = tab.run(n_std);
    sol.pivots = tab.pivots();
    if (!bounded) {
        sol.status = LpStatus::Unbounded;
        return sol;
    }
    sol.status = LpStatus::Optimal;

    // Re-solve on the final basis for clean primal and dual values.
    const auto& basis = tab.basis();
    Matrix bmat(m, m);
    Vector cb(m);
    for (int r = 0; r < m; ++r) {
        const int col = basis[r];
        if (col < n_std) {
            bmat.col(r) = s.a.col(col);
            cb[r] = s.cost[col];
        } else {
            bmat.col(r) = Vector::Unit(m, col - n_std);
            cb[r] = 0.0;
        }
    }
    Vector xb(m), ystd(m);
    if (m > 0) {
        Eigen::FullPivLU<Matrix> lu(bmat);
        if (lu.rank() == m) {
            xb = lu.solve(s.b);
            ystd = lu.transpose().solve(cb);
        } else {
            for (int r = 0; r < m; ++r) xb[r] = tab.value(r);
            ystd = bmat.transpose().completeOrthogonalDecomposition().solve(cb);
        }
    }
    Vector xstd = Vector::Zero(n_std);
    for (int r = 0; r < m; ++r)
        if (basis[r] < n_std) xstd[basis[r]] = std::max(xb[r], 0.0);

    const int n = lp.n_vars();
    sol.x.resize(n);
    for (int j = 0; j < n; ++j) {
        sol.x[j] = xstd[s.plus_col[j]];
        if (s.minus_col[j] >= 0) sol.x[j] -= xstd[s.minus_col[j]];
    }
    sol.dual_eq = Vector::Zero(lp.a_eq.rows());
    sol.dual_ge = Vector::Zero(lp.a_ge.rows());
    sol.bound_dual = Vector::Zero(n);
    for (int r = 0; r < m; ++r) {
        const double y = s.sign[r] * ystd[r];
        switch (s.kind[r]) {
            case RowKind::Eq: sol.dual_eq[s.source[r]] = y; break;
            case RowKind::Ge: sol.dual_ge[s.source[r]] = y; break;
            case RowKind::UpperBound: sol.bound_dual[s.source[r]] = y; break;
        }
    }
    return sol;
}

/*
 * Dual of  min c.x  s.t.  A_e x = b_e (y free), A_g x >= b_g (z >= 0), x <= u (t >= 0):
 *   min -b_e.y - b_g.z + u.t  s.t.  -(A_e^T y + A_g^T z - t)_j >= -c_j for x_j >= 0,
 *                                     (A_e^T y + A_g^T z - t)_j  =  c_j for free x_j.
 * Columns are [y, z, t over bounded j]; x is read back from the row multipliers.
 */
RawSolution solve_via_dual(const StandardLp& lp, const LpOptions& opts) {
    const int n = lp.n_vars();
    const int me = static_cast<int>(lp.a_eq.rows());
    const int mg = static_cast<int>(lp.a_ge.rows());
    std::vector<int> bounded, nonneg, free_vars;
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(lp.upper[j])) bounded.push_back(j);
        (lp.lower[j] == 0.0 ? nonneg : free_vars).push_back(j);
    }
    const int nb = static_cast<int>(bounded.size());
    StandardLp d = StandardLp::with_vars(me + mg + nb);
    d.objective.head(me) = -lp.b_eq;
    d.objective.segment(me, mg) = -lp.b_ge;
    for (int k = 0; k < nb; ++k) d.objective[me + mg + k] = lp.upper[bounded[k]];
    d.lower.head(me).setConstant(-kInf);

    Matrix at(n, me + mg + nb);
    at.leftCols(me) = lp.a_eq.transpose();
    at.middleCols(me, mg) = lp.a_ge.transpose();
    at.rightCols(nb).setZero();
    for (int k = 0; k < nb; ++k) at(bounded[k], me + mg + k) = -1.0;
    d.a_ge.resize(static_cast<Eigen::Index>(nonneg.size()), at.cols());
    d.b_ge.resize(static_cast<Eigen::Index>(nonneg.size()));
    for (std::size_t r = 0; r < nonneg.size(); ++r) {
        d.a_ge.row(static_cast<Eigen::Index>(r)) = -at.row(nonneg[r]);
        d.b_ge[static_cast<Eigen::Index>(r)] = -lp.objective[nonneg[r]];
    }
    d.a_eq.resize(static_cast<Eigen::Index>(free_vars.size()), at.cols());
    d.b_eq.resize(static_cast<Eigen::Index>(free_vars.size()));
    for (std::size_t r = 0; r < free_vars.size(); ++r) {
        d.a_eq.row(static_cast<Eigen::Index>(r)) = at.row(free_vars[r]);
        d.b_eq[static_cast<Eigen::Index>(r)] = lp.objective[free_vars[r]];
    }

    RawSolution ds = solve_primal(d, opts);
    RawSolution sol;
    sol.pivots = ds.pivots;
    if (ds.status == LpStatus::Unbounded) {
        sol.status = LpStatus::Infeasible;
        return sol;
    }
    if (ds.status == LpStatus::Infeasible) {
        // Either infeasible or unbounded; the direct solve tells which.
        RawSolution direct = solve_primal(lp, opts);
        direct.pivots += sol.pivots;
        return direct;
    }
    sol.status = LpStatus::Optimal;
    sol.x.resize(n);
    for (std::size_t r = 0; r < nonneg.size(); ++r) sol.x[nonneg[r]] = ds.dual_ge[static_cast<Eigen::Index>(r)];
    for (std::size_t r = 0; r < free_vars.size(); ++r) sol.x[free_vars[r]] = -ds.dual_eq[static_cast<Eigen::Index>(r)];
    sol.dual_eq = ds.x.head(me);
    sol.dual_ge = ds.x.segment(me, mg);
    sol.bound_dual = Vector::Zero(n);
    for (int k = 0; k < nb; ++k) sol.bound_dual[bounded[k]] = ds.x[me + mg + k];
    return sol;
}

}  // namespace

LpSolution solve_lp(const StandardLp& lp, const LpOptions& opts) {
    lp.check();
    const int n = lp.n_vars();
    int n_cols = 0;
    for (int j = 0; j < n; ++j) n_cols += lp.lower[j] == 0.0 ? 1 : 2;
    int n_rows = static_cast<int>(lp.a_eq.rows() + lp.a_ge.rows());
    for (int j = 0; j < n; ++j) n_rows += std::isfinite(lp.upper[j]) ? 1 : 0;
    // Tall programs are solved through their dual, whose tableau has one row per variable.
    RawSolution raw = n_rows > 2 * n_cols ? solve_via_dual(lp, opts) : solve_primal(lp, opts);

    LpSolution sol;
    sol.status = raw.status;
    sol.pivots = raw.pivots;
    if (raw.status != LpStatus::Optimal) return sol;
    sol.x = std::move(raw.x);
    sol.dual_eq = std::move(raw.dual_eq);
    sol.dual_ge = std::move(raw.dual_ge);
    const Vector& bound_dual = raw.bound_dual;

    // Certificate in the original variables.
    sol.objective_value = lp.objective.dot(sol.x) + lp.constant;
    sol.dual_objective = lp.b_eq.dot(sol.dual_eq) + lp.b_ge.dot(sol.dual_ge) + lp.constant;
    for (int j = 0; j < n; ++j)
        if (std::isfinite(lp.upper[j])) sol.dual_objective -= bound_dual[j] * lp.upper[j];

    double pres = 0.0;
    if (lp.a_eq.rows() > 0) pres = std::max(pres, (lp.a_eq * sol.x - lp.b_eq).cwiseAbs().maxCoeff());
    Vector slack_ge = lp.a_ge * sol.x - lp.b_ge;
    for (Eigen::Index r = 0; r < slack_ge.size(); ++r) pres = std::max(pres, -slack_ge[r]);
    for (int j = 0; j < n; ++j) {
        if (lp.lower[j] == 0.0) pres = std::max(pres, -sol.x[j]);
        if (std::isfinite(lp.upper[j])) pres = std::max(pres, sol.x[j] - lp.upper[j]);
    }
    const Vector reduced =
        lp.objective - lp.a_eq.transpose() * sol.dual_eq - lp.a_ge.transpose() * sol.dual_ge + bound_dual;
    double dres = 0.0, comp = 0.0;
    for (Eigen::Index r = 0; r < slack_ge.size(); ++r) {
        dres = std::max(dres, -sol.dual_ge[r]);
        comp = std::max(comp, std::abs(sol.dual_ge[r] * slack_ge[r]));
    }
    for (int j = 0; j < n; ++j) {
        if (lp.lower[j] == 0.0) {
            dres = std::max(dres, -reduced[j]);
            comp = std::max(comp, std::abs(reduced[j] * sol.x[j]));
        } else {
            dres = std::max(dres, std::abs(reduced[j]));
        }
        if (std::isfinite(lp.upper[j])) {
            dres = std::max(dres, -bound_dual[j]);
            comp = std::max(comp, std::abs(bound_dual[j] * (lp.upper[j] - sol.x[j])));
        }
    }
    sol.primal_residual = std::max(pres, 0.0);
    sol.dual_residual = std::max(dres, 0.0);
    sol.complementarity = comp;
    const double scale = 1.0 + std::abs(sol.objective_value);
    if (sol.primal_residual > opts.certificate_tol * scale || sol.dual_residual > opts.certificate_tol * scale ||
        std::abs(sol.objective_value - sol.dual_objective) > opts.certificate_tol * scale)
        throw NumericError("simplex certificate failed: primal " + std::to_string(sol.primal_residual) +
                           ", dual " + std::to_string(sol.dual_residual) + ", gap " +
                           std::to_string(std::abs(sol.objective_value - sol.dual_objective)));
    return sol;
}

}  // namespace rsmdp
