#pragma once

// Finite-dimensional kernels: RWMC, MALA, HMC and its relativistic,
// Riemannian and surrogate-dynamics variants.

#include "invmh/core.hpp"
#include "invmh/integrators.hpp"

#include <Eigen/Cholesky>

#include <variant>

namespace invmh {

/// Identity, diagonal or dense SPD mass matrix. A default-constructed mass
/// is the identity of whatever dimension it is used with.
template <typename Scalar>
class MassMatrix {
 public:
  enum class Kind { Identity, Diagonal, Dense };

  MassMatrix() = default;

  static MassMatrix identity() { return MassMatrix(); }

  static MassMatrix diagonal(Vector<Scalar> d) {
    if (d.size() == 0 || !d.allFinite() || (d.array() <= Scalar(0)).any())
      throw ConfigError("MassMatrix: diagonal entries must be positive and finite");
    MassMatrix m;
    m.kind_ = Kind::Diagonal;
    m.sqrt_diag_ = d.cwiseSqrt();
    m.diag_ = std::move(d);
    return m;
  }

  static MassMatrix dense(const Matrix<Scalar>& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw ConfigError("MassMatrix: matrix must be square");
    if (!a.isApprox(a.transpose(), Scalar(1e-12)))
      throw ConfigError("MassMatrix: matrix must be symmetric");
    MassMatrix m;
    m.kind_ = Kind::Dense;
    m.llt_.compute(a);
    if (m.llt_.info() != Eigen::Success) throw ConfigError("MassMatrix: matrix is not positive definite");
    m.dim_ = a.rows();
    return m;
  }

  Kind kind() const { return kind_; }

  /// Dimension, or 0 for the dimension-free identity.
  Index dim() const {
    switch (kind_) {
      case Kind::Diagonal: return diag_.size();
      case Kind::Dense: return dim_;
      default: return 0;
    }
  }

  /// A draw from N(0, M).
  Vector<Scalar> sample(Index d, Rng& rng) const {
    Vector<Scalar> xi = standard_normal<Scalar>(d, rng);
    switch (kind_) {
      case Kind::Diagonal: return sqrt_diag_.cwiseProduct(xi);
      case Kind::Dense: return llt_.matrixL() * xi;
      default: return xi;
    }
  }

  /// M^{-1} v
  Vector<Scalar> solve(const Vector<Scalar>& v) const {
    switch (kind_) {
      case Kind::Diagonal: return v.cwiseQuotient(diag_);
      case Kind::Dense: return llt_.solve(v);
      default: return v;
    }
  }

  /// 1/2 <M^{-1} v, v>
  Scalar kinetic(const Vector<Scalar>& v) const { return Scalar(0.5) * v.dot(solve(v)); }

 private:
  Kind kind_ = Kind::Identity;
  Vector<Scalar> diag_, sqrt_diag_;
  Eigen::LLT<Matrix<Scalar>> llt_;
  Index dim_ = 0;
};

template <typename Scalar>
struct HmcConfig {
  Scalar delta = Scalar(0.1);
  int n = 10;
  MassMatrix<Scalar> mass{};
};

/// N(0, M) momentum law with log density -1/2 <M^{-1} v, v>.
template <typename Scalar>
AuxiliaryKernel<Scalar> gaussian_momentum(Index dim, MassMatrix<Scalar> mass = {}) {
  if (mass.dim() != 0 && mass.dim() != dim) throw ConfigError("mass matrix dimension mismatch");
  return {[dim, mass](const Vector<Scalar>&, Rng& rng) { return mass.sample(dim, rng); },
          [mass](const Vector<Scalar>&, const Vector<Scalar>& v) { return -mass.kinetic(v); }, dim};
}

/// Involution R o hat_s with log RN from the extended density; the Jacobian
/// term is added numerically unless hat_s is declared volume-preserving.
template <typename Scalar, typename HatS>
Involution<Scalar> flip_involution(TargetPotential<Scalar> target, AuxiliaryKernel<Scalar> aux,
                                   HatS hat_s, bool volume_preserving = true,
                                   Index jacobian_cap = kDefaultJacobianCap) {
  if (!volume_preserving && target.dim > jacobian_cap)
    throw ConfigError("non-volume-preserving scheme needs dimension <= " +
                      std::to_string(jacobian_cap) + " for the Jacobian");
  auto s_map = [hat_s](const ExtendedPoint<Scalar>& z) { return momentum_flip(hat_s(z)); };
  return guarded_involution<Scalar>([target = std::move(target), aux = std::move(aux), s_map,
                                     volume_preserving,
                                     jacobian_cap](const ExtendedPoint<Scalar>& z) {
    ExtendedPoint<Scalar> sz = s_map(z);
    const Scalar here = -target(z.q) + aux.log_density(z.q, z.v);
    if (!std::isfinite(here) || !sz.all_finite()) return Proposal<Scalar>{std::move(sz), -kInf<Scalar>};
    const Scalar there = -target(sz.q) + aux.log_density(sz.q, sz.v);
    Scalar log_rn = there - here;
    if (!volume_preserving && std::isfinite(log_rn))
      log_rn += numerical_logdet_jacobian(s_map, z, std::optional<Scalar>{}, jacobian_cap);
    if (std::isnan(log_rn)) log_rn = -kInf<Scalar>;
    return Proposal<Scalar>{std::move(sz), log_rn};
  });
}

namespace detail {

template <typename Scalar>
void require_grad(const TargetPotential<Scalar>& u, const char* who) {
  if (!u.has_grad()) throw ConfigError(std::string(who) + ": target gradient is required");
}

template <typename Scalar>
void require_positive(Scalar x, const char* what) {
  if (!(x > Scalar(0)) || !std::isfinite(x)) throw ConfigError(std::string(what) + " must be positive");
}

template <typename Scalar>
VectorField<Scalar> neg_grad(const TargetPotential<Scalar>& u) {
  return [g = u.grad](const Vector<Scalar>& q) -> Vector<Scalar> { return -g(q); };
}

}  // namespace detail

/// Jump law for RWMC: a sampler and the jump kinetic energy K(v).
template <typename Scalar>
struct JumpKernel {
  std::function<Vector<Scalar>(Rng&)> sample;
  std::function<Scalar(const Vector<Scalar>&)> kinetic;
};

/// N(0, step^2 I) jumps.
template <typename Scalar>
JumpKernel<Scalar> gaussian_jump(Index dim, Scalar step) {
  detail::require_positive(step, "gaussian_jump: step");
  return {[dim, step](Rng& rng) -> Vector<Scalar> { return step * standard_normal<Scalar>(dim, rng); },
          [step](const Vector<Scalar>& v) { return Scalar(0.5) * v.squaredNorm() / (step * step); }};
}

/// S(q, v) = (q + v, -v).
template <typename Scalar>
InvolutiveKernel<Scalar> rwmc(TargetPotential<Scalar> target, JumpKernel<Scalar> jump) {
  if (!jump.sample || !jump.kinetic) throw ConfigError("rwmc: jump kernel is empty");
  AuxiliaryKernel<Scalar> aux{
      [s = jump.sample](const Vector<Scalar>&, Rng& rng) { return s(rng); },
      [k = jump.kinetic](const Vector<Scalar>&, const Vector<Scalar>& v) { return -k(v); },
      target.dim};
  auto map = [target, k = jump.kinetic](const ExtendedPoint<Scalar>& z) {
    ExtendedPoint<Scalar> sz{z.q + z.v, -z.v};
    Scalar log_rn = target(z.q) - target(sz.q) + k(z.v) - k(sz.v);
    if (std::isnan(log_rn)) log_rn = -kInf<Scalar>;
    return Proposal<Scalar>{std::move(sz), log_rn};
  };
  return InvolutiveKernel<Scalar>(target, std::move(aux), guarded_involution<Scalar>(map), "rwmc");
}

/// q - delta^2/2 grad U(q) + delta v
template <typename Scalar>
Vector<Scalar> mala_proposal(const TargetPotential<Scalar>& target, Scalar delta,
                             const Vector<Scalar>& q, const Vector<Scalar>& v) {
  return q - Scalar(0.5) * delta * delta * target.grad(q) + delta * v;
}

/// The v with mala_proposal(q, v) = q_tilde.
template <typename Scalar>
Vector<Scalar> mala_proposal_inverse(const TargetPotential<Scalar>& target, Scalar delta,
                                     const Vector<Scalar>& q, const Vector<Scalar>& q_tilde) {
  return (q_tilde - q + Scalar(0.5) * delta * delta * target.grad(q)) / delta;
}

/// Hastings log ratio log[p(q~) r(q~, q)] - log[p(q) r(q, q~)] with the
/// Langevin proposal density r(q, .) = N(q - delta^2/2 grad U(q), delta^2 I).
template <typename Scalar>
Scalar mala_log_hastings(const TargetPotential<Scalar>& target, Scalar delta,
                         const Vector<Scalar>& q, const Vector<Scalar>& q_tilde) {
  auto log_r = [&](const Vector<Scalar>& from, const Vector<Scalar>& to) {
    const Vector<Scalar> mean = from - Scalar(0.5) * delta * delta * target.grad(from);
    return Scalar(-0.5) * (to - mean).squaredNorm() / (delta * delta);
  };
  const Scalar out = -target(q_tilde) + log_r(q_tilde, q) + target(q) - log_r(q, q_tilde);
  return std::isnan(out) ? -kInf<Scalar> : out;
}

/// S = R o leapfrog(1, delta/2, delta, f1 = v, f2 = -grad U), standard
/// normal velocities, energy-form log RN.
template <typename Scalar>
InvolutiveKernel<Scalar> mala(TargetPotential<Scalar> target, Scalar delta) {
  detail::require_grad(target, "mala");
  detail::require_positive(delta, "mala: delta");
  auto aux = gaussian_momentum<Scalar>(target.dim);
  auto hat_s = [f2 = detail::neg_grad(target), delta](const ExtendedPoint<Scalar>& z) {
    return leapfrog(1, delta / Scalar(2), delta, [](const Vector<Scalar>& v) { return v; }, f2, z);
  };
  auto inv = flip_involution<Scalar>(target, aux, hat_s);
  return InvolutiveKernel<Scalar>(std::move(target), std::move(aux), std::move(inv), "mala");
}

/// Classical HMC: v ~ N(0, M), leapfrog(n, delta/2, delta) with
/// f1 = M^{-1} v, f2 = -grad U, momentum flip.
template <typename Scalar>
InvolutiveKernel<Scalar> hmc(TargetPotential<Scalar> target, HmcConfig<Scalar> cfg) {
  detail::require_grad(target, "hmc");
  detail::require_positive(cfg.delta, "hmc: delta");
  if (cfg.n < 1) throw ConfigError("hmc: n must be at least 1");
  auto aux = gaussian_momentum<Scalar>(target.dim, cfg.mass);
  auto hat_s = [f2 = detail::neg_grad(target), cfg](const ExtendedPoint<Scalar>& z) {
    return leapfrog(cfg.n, cfg.delta / Scalar(2), cfg.delta,
                    [&m = cfg.mass](const Vector<Scalar>& v) { return m.solve(v); }, f2, z);
  };
  auto inv = flip_involution<Scalar>(target, aux, hat_s);
  return InvolutiveKernel<Scalar>(std::move(target), std::move(aux), std::move(inv), "hmc");
}

/// K(v) = m c^2 sqrt(|v|^2 / (m^2 c^2) + 1)
template <typename Scalar>
struct RelativisticKinetic {
  Scalar m, c;

  Scalar operator()(const Vector<Scalar>& v) const {
    return m * c * c * std::sqrt(v.squaredNorm() / (m * m * c * c) + Scalar(1));
  }

  /// grad K(v) = v / (m sqrt(|v|^2 / (m^2 c^2) + 1))
  Vector<Scalar> grad(const Vector<Scalar>& v) const {
    return v / (m * std::sqrt(v.squaredNorm() / (m * m * c * c) + Scalar(1)));
  }

  /// Radial profile phi(r) = K at |v| = r, and its derivative.
  Scalar phi(Scalar r) const { return c * std::sqrt(m * m * c * c + r * r); }
  Scalar dphi(Scalar r) const { return c * r / std::sqrt(m * m * c * c + r * r); }
};

/// Draws from density proportional to exp(-K(v)) on R^d.
///
/// The radius has density r^{d-1} exp(-phi(r)); phi is convex so its tangent
/// at r0 bounds it below, giving a Gamma(d, rate phi'(r0)) envelope. r0 is
/// chosen where r0 phi'(r0) = d, which puts the envelope mode near the target
/// mode. Direction is uniform.
template <typename Scalar>
class RelativisticMomentumSampler {
 public:
  RelativisticMomentumSampler(RelativisticKinetic<Scalar> k, Index dim, int max_attempts = 1000)
      : k_(k), dim_(dim), max_attempts_(max_attempts) {
    const Scalar target = Scalar(dim);
    Scalar lo(0), hi = std::max(Scalar(1), Scalar(2) * (target / k.c + k.m * k.c));
    while (hi * k.dphi(hi) < target) hi *= Scalar(2);
    for (int i = 0; i < 200; ++i) {
      const Scalar mid = Scalar(0.5) * (lo + hi);
      (mid * k.dphi(mid) < target ? lo : hi) = mid;
    }
    r0_ = Scalar(0.5) * (lo + hi);
    rate_ = k.dphi(r0_);
  }

  Vector<Scalar> operator()(Rng& rng) const {
    std::gamma_distribution<Scalar> gamma(Scalar(dim_), Scalar(1) / rate_);
    std::uniform_real_distribution<Scalar> unif(Scalar(0), Scalar(1));
    for (int attempt = 0; attempt < max_attempts_; ++attempt) {
      const Scalar r = gamma(rng);
      const Scalar log_accept = -k_.phi(r) + k_.phi(r0_) + rate_ * (r - r0_);
      if (std::log(unif(rng)) < log_accept) {
        Vector<Scalar> dir = standard_normal<Scalar>(dim_, rng);
        const Scalar norm = dir.norm();
        if (!(norm > Scalar(0))) continue;
        return r * dir / norm;
      }
    }
    throw SamplerError("relativistic momentum sampler: no acceptance after " +
                       std::to_string(max_attempts_) + " attempts");
  }

  Scalar envelope_rate() const { return rate_; }

 private:
  RelativisticKinetic<Scalar> k_;
  Index dim_;
  int max_attempts_;
  Scalar r0_{}, rate_{};
};

/// Relativistic HMC: v ~ exp(-K), drift along grad K, leapfrog + flip,
/// energy-form log RN with H = U + K.
template <typename Scalar>
InvolutiveKernel<Scalar> relativistic_hmc(TargetPotential<Scalar> target, Scalar m, Scalar c,
                                          HmcConfig<Scalar> cfg) {
  detail::require_grad(target, "relativistic_hmc");
  detail::require_positive(m, "relativistic_hmc: m");
  detail::require_positive(c, "relativistic_hmc: c");
  detail::require_positive(cfg.delta, "relativistic_hmc: delta");
  if (cfg.n < 1) throw ConfigError("relativistic_hmc: n must be at least 1");
  const RelativisticKinetic<Scalar> kin{m, c};
  RelativisticMomentumSampler<Scalar> sampler(kin, target.dim);
  AuxiliaryKernel<Scalar> aux{
      [sampler](const Vector<Scalar>&, Rng& rng) { return sampler(rng); },
      [kin](const Vector<Scalar>&, const Vector<Scalar>& v) { return -kin(v); }, target.dim};
  auto hat_s = [f2 = detail::neg_grad(target), kin, cfg](const ExtendedPoint<Scalar>& z) {
    return leapfrog(cfg.n, cfg.delta / Scalar(2), cfg.delta,
                    [&kin](const Vector<Scalar>& v) { return kin.grad(v); }, f2, z);
  };
  auto inv = flip_involution<Scalar>(target, aux, hat_s);
  return InvolutiveKernel<Scalar>(std::move(target), std::move(aux), std::move(inv),
                                  "relativistic_hmc");
}

/// Position-dependent metric M(q) with the derivative terms the Hamiltonian
/// field needs: grad_q 1/2 <M(q)^{-1} v, v> and grad_q 1/2 log det M(q).
template <typename Scalar>
struct Metric {
  std::function<Matrix<Scalar>(const Vector<Scalar>&)> matrix;
  PhaseField<Scalar> grad_quadratic;
  VectorField<Scalar> grad_half_logdet;
};

/// M(q) = M constant; derivative terms vanish.
template <typename Scalar>
Metric<Scalar> constant_metric(Matrix<Scalar> m) {
  const Index d = m.rows();
  return {[m](const Vector<Scalar>&) { return m; },
          [d](const Vector<Scalar>&, const Vector<Scalar>&) -> Vector<Scalar> { return Vector<Scalar>::Zero(d); },
          [d](const Vector<Scalar>&) -> Vector<Scalar> { return Vector<Scalar>::Zero(d); }};
}

/// M(q) = diag(1 + q_i^2).
template <typename Scalar>
Metric<Scalar> one_plus_q2_metric() {
  return {[](const Vector<Scalar>& q) -> Matrix<Scalar> {
            return (Vector<Scalar>::Ones(q.size()) + q.cwiseAbs2()).asDiagonal();
          },
          [](const Vector<Scalar>& q, const Vector<Scalar>& v) -> Vector<Scalar> {
            const auto m = (Scalar(1) + q.array().square());
            return (-v.array().square() * q.array() / m.square()).matrix();
          },
          [](const Vector<Scalar>& q) -> Vector<Scalar> {
            return (q.array() / (Scalar(1) + q.array().square())).matrix();
          }};
}

/// RMHMC: v ~ N(0, M(q)), generalized Stormer-Verlet on
/// H = U + 1/2 <M(q)^{-1} v, v> + 1/2 log det M(q).
template <typename Scalar>
InvolutiveKernel<Scalar> rmhmc(TargetPotential<Scalar> target, Metric<Scalar> metric, Scalar delta,
                               int n, FixedPointOptions opts = {}) {
  detail::require_grad(target, "rmhmc");
  detail::require_positive(delta, "rmhmc: delta");
  if (n < 1) throw ConfigError("rmhmc: n must be at least 1");
  if (!metric.matrix || !metric.grad_quadratic || !metric.grad_half_logdet)
    throw ConfigError("rmhmc: metric and both derivative terms are required");
  const Index d = target.dim;

  auto factor = [metric](const Vector<Scalar>& q) {
    Eigen::LLT<Matrix<Scalar>> llt(metric.matrix(q));
    return llt;
  };
  AuxiliaryKernel<Scalar> aux{
      [factor, d](const Vector<Scalar>& q, Rng& rng) -> Vector<Scalar> {
        auto llt = factor(q);
        if (llt.info() != Eigen::Success) throw SamplerError("rmhmc: metric not positive definite");
        return llt.matrixL() * standard_normal<Scalar>(d, rng);
      },
      [factor](const Vector<Scalar>& q, const Vector<Scalar>& v) -> Scalar {
        auto llt = factor(q);
        if (llt.info() != Eigen::Success) return -kInf<Scalar>;
        const Scalar half_logdet = llt.matrixLLT().diagonal().array().log().sum();
        return Scalar(-0.5) * v.dot(llt.solve(v)) - half_logdet;
      },
      d};
  auto f1 = [factor](const Vector<Scalar>& q, const Vector<Scalar>& v) -> Vector<Scalar> {
    auto llt = factor(q);
    if (llt.info() != Eigen::Success) throw DivergenceError("rmhmc: metric not positive definite");
    return llt.solve(v);
  };
  auto f2 = [grad = target.grad, metric](const Vector<Scalar>& q, const Vector<Scalar>& v) -> Vector<Scalar> {
    return -(grad(q) + metric.grad_quadratic(q, v) + metric.grad_half_logdet(q));
  };
  auto hat_s = [f1, f2, delta, n, opts](const ExtendedPoint<Scalar>& z) {
    return stormer_verlet(n, delta, f1, f2, z, opts);
  };
  auto inv = flip_involution<Scalar>(target, aux, hat_s);
  return InvolutiveKernel<Scalar>(std::move(target), std::move(aux), std::move(inv), "rmhmc");
}

/// kick_{delta1} o drift_{delta2} o kick_{delta1}, kick along f2(q), drift along f1(v).
template <typename Scalar>
struct LeapfrogScheme {
  Scalar delta1, delta2;
  VectorField<Scalar> f1, f2;
};

template <typename Scalar>
struct StormerVerletScheme {
  Scalar delta;
  PhaseField<Scalar> f1, f2;
  FixedPointOptions opts{};
};

template <typename Scalar>
struct PalindromeScheme {
  std::vector<Stage<Scalar>> stages;
  PalindromeCenter center = PalindromeCenter::Doubled;
};

template <typename Scalar>
using SurrogateScheme =
    std::variant<LeapfrogScheme<Scalar>, StormerVerletScheme<Scalar>, PalindromeScheme<Scalar>>;

struct SurrogateOptions {
  /// When false the log RN gains a numerically computed log|det grad S|.
  bool volume_preserving = true;
  Index jacobian_cap = kDefaultJacobianCap;
};

/// The hat-S map of a surrogate scheme, n-fold.
template <typename Scalar>
PhaseMap<Scalar> scheme_map(const SurrogateScheme<Scalar>& scheme, int n) {
  if (n < 1) throw ConfigError("surrogate scheme: n must be at least 1");
  return std::visit(
      [n](const auto& s) -> PhaseMap<Scalar> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LeapfrogScheme<Scalar>>) {
          if (!s.f1 || !s.f2) throw ConfigError("leapfrog scheme: f1 and f2 are required");
          return [s, n](const ExtendedPoint<Scalar>& z) {
            return leapfrog(n, s.delta1, s.delta2, s.f1, s.f2, z);
          };
        } else if constexpr (std::is_same_v<S, StormerVerletScheme<Scalar>>) {
          if (!s.f1 || !s.f2) throw ConfigError("stormer-verlet scheme: f1 and f2 are required");
          return [s, n](const ExtendedPoint<Scalar>& z) {
            return stormer_verlet(n, s.delta, s.f1, s.f2, z, s.opts);
          };
        } else {
          return palindromic_compose<Scalar>(s.stages, n, s.center);
        }
      },
      scheme);
}

/// General surrogate-dynamics HMC: any auxiliary law, any R-reversible
/// scheme; S = R o hat-S.
template <typename Scalar>
InvolutiveKernel<Scalar> surrogate_hmc(TargetPotential<Scalar> target, AuxiliaryKernel<Scalar> aux,
                                       const SurrogateScheme<Scalar>& scheme, int n,
                                       SurrogateOptions opts = {}) {
  auto inv = flip_involution<Scalar>(target, aux, scheme_map(scheme, n), opts.volume_preserving,
                                     opts.jacobian_cap);
  return InvolutiveKernel<Scalar>(std::move(target), std::move(aux), std::move(inv),
                                  "surrogate_hmc");
}

}  // namespace invmh
