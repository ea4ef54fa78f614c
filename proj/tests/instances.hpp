#pragma once

#include "rsmdp/model.hpp"

#include <random>
#include <vector>

namespace rsmdp::testing {

/// Dense random instance: every row has full support, costs uniform in [lo, hi].
inline Mdp random_dense(int n, int na, std::uint64_t seed, double lo = 0.0, double hi = 1.0,
                        std::optional<double> bound = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> w(0.05, 1.0), c(lo, hi);
    std::vector<Matrix> p(n, Matrix(na, n));
    Matrix cost(n, na), k(n, na);
    for (int i = 0; i < n; ++i)
        for (int u = 0; u < na; ++u) {
            for (int j = 0; j < n; ++j) p[i](u, j) = w(rng);
            p[i].row(u) /= p[i].row(u).sum();
            cost(i, u) = c(rng);
            k(i, u) = c(rng);
        }
    if (bound) return make_mdp(p, cost, k, bound);
    return make_mdp(p, cost);
}

/// Random instance with sparse but action-independent supports (each state keeps a random subset
/// containing its successor on a fixed cycle, so the chain stays irreducible).
inline Mdp random_sparse(int n, int na, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> w(0.05, 1.0), c(0.0, 1.0);
    std::bernoulli_distribution keep(0.5);
    std::vector<Matrix> p(n, Matrix::Zero(na, n));
    Matrix cost(n, na);
    for (int i = 0; i < n; ++i) {
        std::vector<int> supp{(i + 1) % n};
        for (int j = 0; j < n; ++j)
            if (j != (i + 1) % n && keep(rng)) supp.push_back(j);
        for (int u = 0; u < na; ++u) {
            for (int j : supp) p[i](u, j) = w(rng);
            p[i].row(u) /= p[i].row(u).sum();
            cost(i, u) = c(rng);
        }
    }
    return make_mdp(p, cost);
}

/**
 * Two closed classes {0, 1} and {2, 3} reached from the transient state 4. Class costs differ
 * by `offset`, so optimal values differ across classes.
 */
inline Mdp two_class(std::uint64_t seed, double offset = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> w(0.1, 1.0), c(0.0, 0.5);
    const int n = 5, na = 2;
    std::vector<Matrix> p(n, Matrix::Zero(na, n));
    Matrix cost(n, na);
    for (int i = 0; i < n; ++i)
        for (int u = 0; u < na; ++u) {
            if (i < 2) {
                p[i](u, 0) = w(rng);
                p[i](u, 1) = w(rng);
            } else if (i < 4) {
                p[i](u, 2) = w(rng);
                p[i](u, 3) = w(rng);
            } else {
                for (int j = 0; j < n; ++j) p[i](u, j) = w(rng);
            }
            p[i].row(u) /= p[i].row(u).sum();
            cost(i, u) = c(rng) + (i >= 2 && i < 4 ? offset : 0.0);
        }
    return make_mdp(p, cost);
}

inline Policy random_deterministic(int n, int na, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, na - 1);
    std::vector<int> a(n);
    for (auto& x : a) x = pick(rng);
    return Policy::deterministic(a, na);
}

inline Policy random_randomized(int n, int na, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> w(0.05, 1.0);
    Matrix y(n, na);
    for (int i = 0; i < n; ++i) {
        for (int u = 0; u < na; ++u) y(i, u) = w(rng);
        y.row(i) /= y.row(i).sum();
    }
    return Policy::randomized(y);
}

}  // namespace rsmdp::testing
