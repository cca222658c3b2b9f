#pragma once

#include "invmh/errors.hpp"
#include "invmh/types.hpp"

#include <Eigen/LU>

#include <optional>
#include <string>

namespace invmh {

/// Largest position dimension for which dense finite-difference Jacobians
/// are formed. The Jacobian itself is (2d) x (2d).
inline constexpr Index kDefaultJacobianCap = 10;

/// Finite-difference step used throughout: 1e-4 * (1 + |z|_inf). With the
/// fourth-order stencil truncation error is near 1e-16 * |f^(5)| and
/// rounding noise near 1e-12.
template <typename Scalar>
Scalar default_fd_step(const ExtendedPoint<Scalar>& z) {
  return Scalar(1e-4) * (Scalar(1) + sup_norm(z));
}

/// Jacobian of a phase-space map at z by the five-point central stencil, in
/// the flattened (q, v) coordinates.
template <typename Scalar, typename Map>
Matrix<Scalar> numerical_jacobian(const Map& map, const ExtendedPoint<Scalar>& z, Scalar h) {
  const Index q_dim = z.q.size();
  const Vector<Scalar> x = flatten(z);
  const Index n = x.size();
  Matrix<Scalar> jac(n, n);
  for (Index j = 0; j < n; ++j) {
    auto at = [&](Scalar offset) {
      Vector<Scalar> y = x;
      y[j] += offset;
      Vector<Scalar> out = flatten<Scalar>(map(unflatten(y, q_dim)));
      if (out.size() != n) throw ConfigError("numerical_jacobian: map changes the phase-space dimension");
      return out;
    };
    jac.col(j) = (at(-Scalar(2) * h) - Scalar(8) * at(-h) + Scalar(8) * at(h) - at(Scalar(2) * h)) /
                 (Scalar(12) * h);
  }
  return jac;
}

/// log|det| of a square matrix via full-pivot LU; -inf when singular or
/// non-finite.
template <typename Scalar>
Scalar log_abs_det(const Matrix<Scalar>& a) {
  if (!a.allFinite()) return -kInf<Scalar>;
  Eigen::FullPivLU<Matrix<Scalar>> lu(a);
  if (lu.rank() < a.rows()) return -kInf<Scalar>;
  const auto& packed = lu.matrixLU();
  Scalar acc(0);
  for (Index i = 0; i < packed.rows(); ++i) {
    const Scalar u = std::abs(packed(i, i));
    if (!(u > Scalar(0))) return -kInf<Scalar>;
    acc += std::log(u);
  }
  return acc;
}

/// log|det grad map(z)| by finite differences. Maps that throw (divergence,
/// non-convergence) yield -inf, the same as a singular Jacobian.
template <typename Scalar, typename Map>
Scalar numerical_logdet_jacobian(const Map& map, const ExtendedPoint<Scalar>& z,
                                 std::optional<Scalar> h = std::nullopt,
                                 Index cap = kDefaultJacobianCap) {
  if (z.q.size() > cap)
    throw ConfigError("numerical_logdet_jacobian: position dimension " +
                      std::to_string(z.q.size()) + " exceeds cap " + std::to_string(cap));
  try {
    return log_abs_det<Scalar>(numerical_jacobian(map, z, h.value_or(default_fd_step(z))));
  } catch (const DivergenceError&) {
    return -kInf<Scalar>;
  } catch (const ConvergenceError&) {
    return -kInf<Scalar>;
  }
}

}  // namespace invmh
