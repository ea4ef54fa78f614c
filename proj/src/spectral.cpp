#include "rsmdp/spectral.hpp"

#include "rsmdp/errors.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

namespace rsmdp {

MultiplicativeKernel build_kernel(const Mdp& m, const Policy& pol, const Matrix& cost, KernelCost tag) {
    pol.check_against(m);
    const int n = m.n_states;
    MultiplicativeKernel k;
    k.cost_tag = tag;
    const double cmax = cost.maxCoeff();
    k.log_scale = cmax > 300.0 ? cmax : 0.0;
    k.a = Matrix::Zero(n, n);
    const Matrix& y = pol.y();
    for (int i = 0; i < n; ++i) {
        for (int u = 0; u < m.n_actions; ++u) {
            if (y(i, u) <= 0.0) continue;
            const double w = y(i, u) * std::exp(cost(i, u) - k.log_scale);
            for (int j = 0; j < n; ++j) {
                const double pij = m.p[i](u, j);
                if (pij >= kSupportFloor) k.a(i, j) += w * pij;
            }
        }
    }
    return k;
}

MultiplicativeKernel build_kernel(const Mdp& m, const Policy& pol, CostTag tag) {
    return build_kernel(m, pol, m.costs(tag),
                        tag == CostTag::Primary ? KernelCost::PrimaryC : KernelCost::ConstraintK);
}

namespace {

struct Tarjan {
    const Matrix& a;
    int n;
    int counter = 0;
    std::vector<int> index, low;
    std::vector<char> on_stack;
    std::vector<int> stack;
    Condensation out;

    explicit Tarjan(const Matrix& a_)
        : a(a_), n(static_cast<int>(a_.rows())), index(n, -1), low(n, 0), on_stack(n, 0) {
        out.class_of.assign(n, -1);
    }

    void visit(int v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = 1;
        for (int w = 0; w < n; ++w) {
            if (!(a(v, w) > 0.0)) continue;
            if (index[w] < 0) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            std::vector<int> cls;
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = 0;
                out.class_of[w] = static_cast<int>(out.classes.size());
                cls.push_back(w);
            } while (w != v);
            std::sort(cls.begin(), cls.end());
            out.classes.push_back(std::move(cls));
        }
    }
};

Matrix restrict(const Matrix& a, const std::vector<int>& idx) {
    const int k = static_cast<int>(idx.size());
    Matrix sub(k, k);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) sub(r, c) = a(idx[r], idx[c]);
    return sub;
}

}  // namespace

Condensation scc_condensation(const Matrix& a) {
    Tarjan t(a);
    for (int v = 0; v < t.n; ++v)
        if (t.index[v] < 0) t.visit(v);
    Condensation out = std::move(t.out);
    out.successors.assign(out.classes.size(), {});
    for (int v = 0; v < a.rows(); ++v)
        for (int w = 0; w < a.cols(); ++w)
            if (a(v, w) > 0.0 && out.class_of[v] != out.class_of[w])
                out.successors[out.class_of[v]].push_back(out.class_of[w]);
    for (auto& s : out.successors) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return out;
}

int class_period(const Matrix& sub) {
    const int n = static_cast<int>(sub.rows());
    std::vector<int> level(n, -1);
    std::deque<int> queue{0};
    level[0] = 0;
    int g = 0;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (int w = 0; w < n; ++w) {
            if (!(sub(v, w) > 0.0)) continue;
            if (level[w] < 0) {
                level[w] = level[v] + 1;
                queue.push_back(w);
            } else {
                g = std::gcd(g, std::abs(level[v] + 1 - level[w]));
            }
        }
    }
    return g == 0 ? 1 : g;
}

double perron_root(const Matrix& sub, const PerronOptions& opts) {
    if (sub.rows() == 1) return sub(0, 0);
    const int period = class_period(sub);
    Vector x = Vector::Ones(sub.rows());
    std::vector<double> log_ratios;
    log_ratios.reserve(static_cast<std::size_t>(opts.max_iter));
    double estimate = 0.0;
    int stable = 0;
    for (int it = 0; it < opts.max_iter; ++it) {
        Vector next = sub * x;
        const double ratio = next.sum() / x.sum();
        if (!(ratio > 0.0)) return 0.0;
        log_ratios.push_back(std::log(ratio));
        x = next / next.sum();
        if (static_cast<int>(log_ratios.size()) < period) continue;
        double window = 0.0;
        for (int k = 0; k < period; ++k) window += log_ratios[log_ratios.size() - 1 - k];
        const double next_estimate = std::exp(window / period);
        if (std::abs(next_estimate - estimate) <= opts.rel_tol * next_estimate) {
            if (++stable >= period + 1) return next_estimate;
        } else {
            stable = 0;
        }
        estimate = next_estimate;
    }
    throw PerronError("power iteration did not converge", estimate);
}

std::vector<std::vector<int>> partition_by_value(const Vector& values, double tol) {
    std::vector<int> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    std::vector<std::vector<int>> cells;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k == 0 || !(std::abs(values[order[k]] - values[order[k - 1]]) <= tol)) cells.emplace_back();
        cells.back().push_back(order[k]);
    }
    for (auto& c : cells) std::sort(c.begin(), c.end());
    std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return cells;
}

SpectralResult evaluate_kernel(const MultiplicativeKernel& k, const PerronOptions& opts) {
    const Condensation cond = scc_condensation(k.a);
    SpectralResult res;
    res.classes = cond.classes;
    const std::size_t nc = cond.classes.size();
    res.class_rho.resize(nc);
    res.class_log_rho.resize(nc);
    std::vector<double> best(nc, -kInf);
    // Tarjan order puts every successor class before its predecessors.
    for (std::size_t c = 0; c < nc; ++c) {
        const double rho = perron_root(restrict(k.a, cond.classes[c]), opts);
        res.class_log_rho[c] = (rho > 0.0 ? std::log(rho) : -kInf) + k.log_scale;
        res.class_rho[c] = std::exp(res.class_log_rho[c]);
        best[c] = res.class_log_rho[c];
        for (int s : cond.successors[c]) best[c] = std::max(best[c], best[s]);
    }
    res.lambda.resize(k.a.rows());
    for (int i = 0; i < k.a.rows(); ++i) res.lambda[i] = best[cond.class_of[i]];
    res.partition = partition_by_value(res.lambda);
    return res;
}

SpectralResult evaluate_policy(const Mdp& m, const Policy& pol, CostTag tag, const PerronOptions& opts) {
    return evaluate_kernel(build_kernel(m, pol, tag), opts);
}

}  // namespace rsmdp
