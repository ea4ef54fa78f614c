#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace rsmdp {

template <typename Scalar>
struct Types {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
};

using Matrix = Types<double>::Matrix;
using Vector = Types<double>::Vector;
using RowMatrix = Types<double>::RowMatrix;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Transition entries below this are treated as exact zeros for support purposes.
inline constexpr double kSupportFloor = 1e-15;

/// log(sum(exp(x))) with max-subtraction. Returns -inf for an empty or all -inf input.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0) return -std::numeric_limits<Scalar>::infinity();
    const Scalar m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x.array() - m).exp().sum());
}

}  // namespace rsmdp
