#pragma once

// Gaussian reference N(0, C) held on the leading d eigenmodes of C.
// Coordinates are eigenbasis coordinates, so C^gamma is diagonal.

#include "invmh/errors.hpp"
#include "invmh/types.hpp"

#include <numbers>
#include <string>

namespace invmh {

template <typename Scalar>
class SpectralGaussian {
 public:
  explicit SpectralGaussian(Vector<Scalar> eigenvalues) : lambda_(std::move(eigenvalues)) {
    if (lambda_.size() == 0) throw ConfigError("SpectralGaussian: no eigenvalues");
    for (Index i = 0; i < lambda_.size(); ++i) {
      if (!(lambda_[i] > Scalar(0)) || !std::isfinite(lambda_[i]))
        throw ConfigError("SpectralGaussian: eigenvalue " + std::to_string(i + 1) +
                          " is not a positive finite number");
      if (i > 0 && lambda_[i] > lambda_[i - 1])
        throw ConfigError("SpectralGaussian: eigenvalues must be non-increasing (index " +
                          std::to_string(i + 1) + ")");
    }
    sqrt_lambda_ = lambda_.cwiseSqrt();
    inv_sqrt_lambda_ = sqrt_lambda_.cwiseInverse();
  }

  /// lambda_i = c * i^{-p}, i = 1..d.
  static SpectralGaussian power_law(Index d, Scalar c, Scalar p) {
    if (d <= 0) throw ConfigError("SpectralGaussian::power_law: dimension must be positive");
    if (!(c > Scalar(0))) throw ConfigError("SpectralGaussian::power_law: c must be positive");
    if (p < Scalar(0)) throw ConfigError("SpectralGaussian::power_law: p must be non-negative");
    Vector<Scalar> lambda(d);
    for (Index i = 0; i < d; ++i) lambda[i] = c * std::pow(Scalar(i + 1), -p);
    return SpectralGaussian(std::move(lambda));
  }

  Index dim() const { return lambda_.size(); }
  const Vector<Scalar>& eigenvalues() const { return lambda_; }
  const Vector<Scalar>& sqrt_eigenvalues() const { return sqrt_lambda_; }
  const Vector<Scalar>& inv_sqrt_eigenvalues() const { return inv_sqrt_lambda_; }
  Scalar trace() const { return lambda_.sum(); }

 private:
  Vector<Scalar> lambda_;
  Vector<Scalar> sqrt_lambda_;
  Vector<Scalar> inv_sqrt_lambda_;
};

template <typename Scalar>
Vector<Scalar> sample(const SpectralGaussian<Scalar>& g, Rng& rng) {
  return g.sqrt_eigenvalues().cwiseProduct(standard_normal<Scalar>(g.dim(), rng));
}

/// C^gamma x, componentwise lambda_i^gamma x_i.
template <typename Scalar, typename Derived>
Vector<Scalar> frac_power(const SpectralGaussian<Scalar>& g, Scalar gamma,
                          const Eigen::MatrixBase<Derived>& x) {
  if (gamma == Scalar(0)) return x;
  if (gamma == Scalar(0.5)) return g.sqrt_eigenvalues().cwiseProduct(x);
  if (gamma == Scalar(-0.5)) return g.inv_sqrt_eigenvalues().cwiseProduct(x);
  if (gamma == Scalar(1)) return g.eigenvalues().cwiseProduct(x);
  if (gamma == Scalar(-1)) return x.cwiseQuotient(g.eigenvalues());
  return g.eigenvalues().array().pow(gamma).matrix().cwiseProduct(x);
}

/// <C^{-1/2} a, C^{-1/2} b>
template <typename Scalar, typename A, typename B>
Scalar cm_inner(const SpectralGaussian<Scalar>& g, const Eigen::MatrixBase<A>& a,
                const Eigen::MatrixBase<B>& b) {
  return (a.cwiseProduct(b).cwiseQuotient(g.eigenvalues())).sum();
}

/// |C^{-1/2} a|^2
template <typename Scalar, typename A>
Scalar cm_norm_sq(const SpectralGaussian<Scalar>& g, const Eigen::MatrixBase<A>& a) {
  return cm_inner(g, a, a);
}

/// log dN(shift, C)/dN(0, C) at x.
template <typename Scalar, typename A, typename B>
Scalar cm_log_ratio(const SpectralGaussian<Scalar>& g, const Eigen::MatrixBase<A>& shift,
                    const Eigen::MatrixBase<B>& x) {
  return cm_inner(g, shift, x) - Scalar(0.5) * cm_norm_sq(g, shift);
}

/// Lebesgue log-density of the truncation. Only meaningful at finite d; used
/// as an oracle.
template <typename Scalar, typename A>
Scalar log_density_lebesgue(const SpectralGaussian<Scalar>& g, const Eigen::MatrixBase<A>& x) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  return Scalar(-0.5) * cm_norm_sq(g, x) -
         Scalar(0.5) * (two_pi * g.eigenvalues().array()).log().sum();
}

}  // namespace invmh
