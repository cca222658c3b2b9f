#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace invmh {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Every chain owns one of these; kernels never hold RNG state.
using Rng = std::mt19937_64;

template <typename Scalar>
constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

/// A point (q, v) of the extended phase space X x Y.
template <typename Scalar>
struct ExtendedPoint {
  Vector<Scalar> q;
  Vector<Scalar> v;

  bool all_finite() const { return q.allFinite() && v.allFinite(); }
};

template <typename Scalar>
Vector<Scalar> flatten(const ExtendedPoint<Scalar>& z) {
  Vector<Scalar> out(z.q.size() + z.v.size());
  out << z.q, z.v;
  return out;
}

template <typename Scalar>
ExtendedPoint<Scalar> unflatten(const Vector<Scalar>& x, Index q_dim) {
  return {x.head(q_dim), x.tail(x.size() - q_dim)};
}

/// Sup-norm distance between two extended points of equal shape.
template <typename Scalar>
Scalar max_abs_diff(const ExtendedPoint<Scalar>& a, const ExtendedPoint<Scalar>& b) {
  Scalar dq = a.q.size() ? (a.q - b.q).cwiseAbs().maxCoeff() : Scalar(0);
  Scalar dv = a.v.size() ? (a.v - b.v).cwiseAbs().maxCoeff() : Scalar(0);
  return std::max(dq, dv);
}

template <typename Scalar>
Scalar sup_norm(const ExtendedPoint<Scalar>& z) {
  Scalar nq = z.q.size() ? z.q.cwiseAbs().maxCoeff() : Scalar(0);
  Scalar nv = z.v.size() ? z.v.cwiseAbs().maxCoeff() : Scalar(0);
  return std::max(nq, nv);
}

template <typename Scalar>
using VectorField = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

/// A field depending on both halves of the phase space, f(q, v).
template <typename Scalar>
using PhaseField = std::function<Vector<Scalar>(const Vector<Scalar>&, const Vector<Scalar>&)>;

template <typename Scalar>
using PhaseMap = std::function<ExtendedPoint<Scalar>(const ExtendedPoint<Scalar>&)>;

template <typename Scalar>
Vector<Scalar> standard_normal(Index n, Rng& rng) {
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  Vector<Scalar> x(n);
  for (Index i = 0; i < n; ++i) x[i] = normal(rng);
  return x;
}

}  // namespace invmh
