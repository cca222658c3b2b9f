#pragma once

// Samplers for targets exp(-Phi) mu0 with mu0 = N(0, C) a SpectralGaussian:
// pCN, infinite-dimensional MALA, infinite-dimensional HMC and the
// generalized Langevin kernel. Log RN values are taken relative to the
// reference product mu0 x mu0, so no Lebesgue density enters.

#include "invmh/core.hpp"
#include "invmh/gaussian_spectral.hpp"
#include "invmh/integrators.hpp"

#include <algorithm>
#include <numbers>

namespace invmh {

template <typename Scalar>
struct HilbertTarget {
  TargetPotential<Scalar> phi;
  SpectralGaussian<Scalar> reference;
  VectorField<Scalar> surrogate_f;

  Index dim() const { return reference.dim(); }
};

/// C grad Phi, the exact preconditioned force.
template <typename Scalar>
VectorField<Scalar> preconditioned_gradient(const TargetPotential<Scalar>& phi,
                                            const SpectralGaussian<Scalar>& ref) {
  if (!phi.has_grad()) throw ConfigError("preconditioned_gradient: Phi has no gradient");
  return [g = phi.grad, lambda = ref.eigenvalues()](const Vector<Scalar>& q) -> Vector<Scalar> {
    return lambda.cwiseProduct(g(q));
  };
}

/// Builds a target; surrogate_f defaults to C grad Phi when Phi has a
/// gradient and is otherwise left empty.
template <typename Scalar>
HilbertTarget<Scalar> make_hilbert_target(TargetPotential<Scalar> phi,
                                          SpectralGaussian<Scalar> reference,
                                          VectorField<Scalar> surrogate_f = {}) {
  if (phi.dim == 0) phi.dim = reference.dim();
  if (phi.dim != reference.dim())
    throw ConfigError("hilbert target: Phi and reference differ in dimension");
  if (!surrogate_f && phi.has_grad()) surrogate_f = preconditioned_gradient(phi, reference);
  return {std::move(phi), std::move(reference), std::move(surrogate_f)};
}

/// Velocity law exp(-H~(q, v)) mu0(dv). Empty variances: the reference
/// itself (H~ = 0). Otherwise N(0, diag k(q)) with
///   H~(q, v) = sum_i 1/2 v_i^2 (1/k_i - 1/lambda_i) + 1/2 log(k_i / lambda_i).
template <typename Scalar>
struct AuxLaw {
  VectorField<Scalar> variances;

  bool is_reference() const { return !variances; }

  static AuxLaw reference() { return {}; }
  static AuxLaw diagonal(VectorField<Scalar> k) {
    if (!k) throw ConfigError("AuxLaw::diagonal: variance function is empty");
    return {std::move(k)};
  }
};

template <typename Scalar>
Scalar h_tilde(const AuxLaw<Scalar>& law, const SpectralGaussian<Scalar>& ref,
               const Vector<Scalar>& q, const Vector<Scalar>& v) {
  if (law.is_reference()) return Scalar(0);
  const Vector<Scalar> k = law.variances(q);
  if (k.size() != ref.dim() || !k.allFinite() || (k.array() <= Scalar(0)).any()) return kInf<Scalar>;
  const auto lam = ref.eigenvalues().array();
  return (Scalar(0.5) * v.array().square() * (k.array().inverse() - lam.inverse()) +
          Scalar(0.5) * (k.array() / lam).log())
      .sum();
}

template <typename Scalar>
AuxiliaryKernel<Scalar> to_auxiliary_kernel(const AuxLaw<Scalar>& law,
                                            const SpectralGaussian<Scalar>& ref) {
  if (law.is_reference())
    return {[ref](const Vector<Scalar>&, Rng& rng) { return sample(ref, rng); },
            [](const Vector<Scalar>&, const Vector<Scalar>&) { return Scalar(0); }, ref.dim()};
  return {[law, d = ref.dim()](const Vector<Scalar>& q, Rng& rng) -> Vector<Scalar> {
            const Vector<Scalar> k = law.variances(q);
            if (k.size() != d || !k.allFinite() || (k.array() <= Scalar(0)).any())
              throw SamplerError("diagonal velocity law: variances must be positive");
            return k.cwiseSqrt().cwiseProduct(standard_normal<Scalar>(d, rng));
          },
          [law, ref](const Vector<Scalar>& q, const Vector<Scalar>& v) {
            return -h_tilde(law, ref, q, v);
          },
          ref.dim()};
}

/// Closed-form log dS*M/dM for S = R o strang_hilbert, from the recorded
/// trajectory z_0..z_n of f-kicks with step delta1.
template <typename Scalar>
Scalar hilbert_log_rn(const HilbertTarget<Scalar>& target, const AuxLaw<Scalar>& law,
                      Scalar delta1, const Trajectory<Scalar>& traj) {
  if (traj.steps() < 1) throw ConfigError("hilbert_log_rn: trajectory has no steps");
  const auto& ref = target.reference;
  const auto& z0 = traj.front();
  const auto& zn = traj.back();
  const std::size_t n = traj.steps();

  auto f_at = [&](const Vector<Scalar>& q) -> Vector<Scalar> {
    if (!target.surrogate_f) return Vector<Scalar>::Zero(q.size());
    return target.surrogate_f(q);
  };

  const Vector<Scalar> f0 = f_at(z0.q);
  const Vector<Scalar> fn = f_at(zn.q);
  Scalar out = target.phi(z0.q) + h_tilde(law, ref, z0.q, z0.v) - target.phi(zn.q) -
               h_tilde(law, ref, zn.q, Vector<Scalar>(-zn.v));
  out -= Scalar(0.5) * delta1 * delta1 * (cm_norm_sq(ref, f0) - cm_norm_sq(ref, fn));
  Scalar inner_sum(0);
  for (std::size_t i = 1; i < n; ++i) inner_sum += cm_inner(ref, traj.states[i].v, f_at(traj.states[i].q));
  out += Scalar(2) * delta1 * inner_sum;
  out += delta1 * (cm_inner(ref, z0.v, f0) + cm_inner(ref, zn.v, fn));
  return std::isfinite(out) ? out : -kInf<Scalar>;
}

/// Runs the trajectory from z and evaluates the closed form; divergence is -inf.
template <typename Scalar>
Scalar hilbert_log_rn(const HilbertTarget<Scalar>& target, const AuxLaw<Scalar>& law,
                      Scalar delta1, Scalar delta2, int n, const ExtendedPoint<Scalar>& z) {
  try {
    auto f = target.surrogate_f ? target.surrogate_f
                                : VectorField<Scalar>([](const Vector<Scalar>& q) -> Vector<Scalar> {
                                    return Vector<Scalar>::Zero(q.size());
                                  });
    return hilbert_log_rn(target, law, delta1, strang_hilbert(n, delta1, delta2, f, z));
  } catch (const DivergenceError&) {
    return -kInf<Scalar>;
  }
}

/// rho = (4 - delta) / (4 + delta)
template <typename Scalar>
Scalar rho_from_delta(Scalar delta) {
  if (!(delta >= Scalar(0)) || !std::isfinite(delta)) throw ConfigError("delta must be non-negative");
  return (Scalar(4) - delta) / (Scalar(4) + delta);
}

namespace detail {

template <typename Scalar>
void require_rho(Scalar rho) {
  if (!(rho > Scalar(-1) && rho <= Scalar(1))) throw ConfigError("rho must lie in (-1, 1]");
}

template <typename Scalar>
void require_hilbert_dims(const HilbertTarget<Scalar>& t) {
  if (!t.phi.eval) throw ConfigError("hilbert target: Phi is empty");
  if (t.phi.dim != t.reference.dim()) throw ConfigError("hilbert target: dimension mismatch");
}

}  // namespace detail

/// Preconditioned HMC: v ~ law, S = R o strang_hilbert(n, delta1, delta2, f),
/// log RN in closed form.
template <typename Scalar>
InvolutiveKernel<Scalar> inf_hmc(const HilbertTarget<Scalar>& target, AuxLaw<Scalar> law,
                                 Scalar delta1, Scalar delta2, int n) {
  detail::require_hilbert_dims(target);
  if (n < 1) throw ConfigError("inf_hmc: n must be at least 1");
  if (!std::isfinite(delta1) || !std::isfinite(delta2)) throw ConfigError("inf_hmc: steps must be finite");
  auto aux = to_auxiliary_kernel(law, target.reference);
  VectorField<Scalar> f = target.surrogate_f
                              ? target.surrogate_f
                              : VectorField<Scalar>([](const Vector<Scalar>& q) -> Vector<Scalar> {
                                  return Vector<Scalar>::Zero(q.size());
                                });
  auto map = [target, law, f, delta1, delta2, n](const ExtendedPoint<Scalar>& z) {
    const Trajectory<Scalar> traj = strang_hilbert(n, delta1, delta2, f, z);
    return Proposal<Scalar>{momentum_flip(traj.back()), hilbert_log_rn(target, law, delta1, traj)};
  };
  return InvolutiveKernel<Scalar>(target.phi, std::move(aux), guarded_involution<Scalar>(map),
                                  "inf_hmc");
}

/// pCN: v ~ mu0, S = R o rotation(acos rho), log RN = Phi(q) - Phi(q~).
template <typename Scalar>
InvolutiveKernel<Scalar> pcn(const HilbertTarget<Scalar>& target, Scalar rho) {
  detail::require_hilbert_dims(target);
  detail::require_rho(rho);
  const Scalar angle = std::acos(rho);
  auto map = [phi = target.phi, angle](const ExtendedPoint<Scalar>& z) {
    ExtendedPoint<Scalar> sz = momentum_flip(rotation(angle, z));
    Scalar log_rn = phi(z.q) - phi(sz.q);
    if (std::isnan(log_rn)) log_rn = -kInf<Scalar>;
    return Proposal<Scalar>{std::move(sz), log_rn};
  };
  return InvolutiveKernel<Scalar>(target.phi, to_auxiliary_kernel(AuxLaw<Scalar>::reference(), target.reference),
                                  guarded_involution<Scalar>(map), "pcn");
}

template <typename Scalar>
InvolutiveKernel<Scalar> pcn_from_delta(const HilbertTarget<Scalar>& target, Scalar delta) {
  return pcn(target, rho_from_delta(delta));
}

/// Infinite-dimensional MALA: one Strang step with f = C grad Phi,
/// delta1 = sqrt(delta)/2, delta2 = acos rho.
template <typename Scalar>
InvolutiveKernel<Scalar> inf_mala(const HilbertTarget<Scalar>& target, Scalar delta) {
  detail::require_hilbert_dims(target);
  if (!(delta > Scalar(0))) throw ConfigError("inf_mala: delta must be positive");
  HilbertTarget<Scalar> t = target;
  t.surrogate_f = preconditioned_gradient(target.phi, target.reference);
  const Scalar rho = rho_from_delta(delta);
  auto k = inf_hmc(t, AuxLaw<Scalar>::reference(), std::sqrt(delta) / Scalar(2), std::acos(rho), 1);
  return InvolutiveKernel<Scalar>(k.target(), k.aux(), k.involution(), "inf_mala");
}

/// F(q, v) = rho q + sqrt(1 - rho^2) (v - sqrt(delta)/2 f(q))
template <typename Scalar>
Vector<Scalar> langevin_proposal(const VectorField<Scalar>& f, Scalar delta,
                                 const Vector<Scalar>& q, const Vector<Scalar>& v) {
  const Scalar rho = rho_from_delta(delta);
  return rho * q + std::sqrt(Scalar(1) - rho * rho) * (v - Scalar(0.5) * std::sqrt(delta) * f(q));
}

/// The v with langevin_proposal(q, v) = q_tilde.
template <typename Scalar>
Vector<Scalar> langevin_proposal_inverse(const VectorField<Scalar>& f, Scalar delta,
                                         const Vector<Scalar>& q, const Vector<Scalar>& q_tilde) {
  const Scalar rho = rho_from_delta(delta);
  return (q_tilde - rho * q) / std::sqrt(Scalar(1) - rho * rho) + Scalar(0.5) * std::sqrt(delta) * f(q);
}

/// log beta(q, q~) = -Phi(q) - delta/8 |C^{-1/2} f(q)|^2
///                   - sqrt(delta)/2 <C^{-1/2}(q~ - rho q)/sqrt(1 - rho^2), C^{-1/2} f(q)>
template <typename Scalar>
Scalar langevin_log_beta(const HilbertTarget<Scalar>& target, const VectorField<Scalar>& f,
                         Scalar delta, const Vector<Scalar>& q, const Vector<Scalar>& q_tilde) {
  const Scalar rho = rho_from_delta(delta);
  const Vector<Scalar> fq = f(q);
  const Vector<Scalar> w = (q_tilde - rho * q) / std::sqrt(Scalar(1) - rho * rho);
  return -target.phi(q) - delta / Scalar(8) * cm_norm_sq(target.reference, fq) -
         Scalar(0.5) * std::sqrt(delta) * cm_inner(target.reference, w, fq);
}

/// log beta(q~, q) - log beta(q, q~)
template <typename Scalar>
Scalar langevin_log_ratio(const HilbertTarget<Scalar>& target, const VectorField<Scalar>& f,
                          Scalar delta, const Vector<Scalar>& q, const Vector<Scalar>& q_tilde) {
  const Scalar out = langevin_log_beta(target, f, delta, q_tilde, q) -
                     langevin_log_beta(target, f, delta, q, q_tilde);
  return std::isnan(out) ? -kInf<Scalar> : out;
}

/// Generalized Langevin kernel with surrogate force f: the involution is the
/// one generated by the proposal map F, acceptance by the beta ratio.
template <typename Scalar>
InvolutiveKernel<Scalar> gen_langevin(const HilbertTarget<Scalar>& target, VectorField<Scalar> f,
                                      Scalar delta) {
  detail::require_hilbert_dims(target);
  if (!f) throw ConfigError("gen_langevin: surrogate force is empty");
  if (!(delta > Scalar(0))) throw ConfigError("gen_langevin: delta must be positive");
  auto s = involution_from_proposal_map<Scalar>(
      [f, delta](const Vector<Scalar>& q, const Vector<Scalar>& v) {
        return langevin_proposal(f, delta, q, v);
      },
      [f, delta](const Vector<Scalar>& q, const Vector<Scalar>& q_tilde) {
        return langevin_proposal_inverse(f, delta, q, q_tilde);
      });
  auto map = [target, f, delta, s](const ExtendedPoint<Scalar>& z) {
    ExtendedPoint<Scalar> sz = s(z);
    return Proposal<Scalar>{sz, langevin_log_ratio(target, f, delta, z.q, sz.q)};
  };
  return InvolutiveKernel<Scalar>(target.phi,
                                  to_auxiliary_kernel(AuxLaw<Scalar>::reference(), target.reference),
                                  guarded_involution<Scalar>(map), "gen_langevin");
}

/// f(q) = K(q) [(C^{-1} - K(q)^{-1}) q + D Phi(q)] for a diagonal K(q) = diag k(q).
template <typename Scalar>
VectorField<Scalar> geometric_surrogate(const TargetPotential<Scalar>& phi,
                                        const SpectralGaussian<Scalar>& ref, VectorField<Scalar> k) {
  if (!phi.has_grad()) throw ConfigError("geometric_surrogate: Phi has no gradient");
  return [g = phi.grad, lambda = ref.eigenvalues(), k = std::move(k)](const Vector<Scalar>& q) -> Vector<Scalar> {
    const Vector<Scalar> kq = k(q);
    return kq.cwiseProduct(q.cwiseQuotient(lambda) - q.cwiseQuotient(kq) + g(q));
  };
}

/// Phi(q) = 1/2 s^2 / (1 + s), s = |q|^2: smooth, bounded below, quartic at
/// the origin and quadratic at infinity.
template <typename Scalar>
TargetPotential<Scalar> quartic_phi(Index dim) {
  return {[](const Vector<Scalar>& q) {
            const Scalar s = q.squaredNorm();
            return Scalar(0.5) * s * s / (Scalar(1) + s);
          },
          [](const Vector<Scalar>& q) -> Vector<Scalar> {
            const Scalar s = q.squaredNorm();
            return q * ((s * s + Scalar(2) * s) / ((Scalar(1) + s) * (Scalar(1) + s)));
          },
          dim};
}

/// Phi(q) = <a, q>
template <typename Scalar>
TargetPotential<Scalar> linear_phi(Vector<Scalar> a) {
  const Index d = a.size();
  return {[a](const Vector<Scalar>& q) { return a.dot(q); },
          [a](const Vector<Scalar>&) -> Vector<Scalar> { return a; }, d};
}

template <typename Scalar>
TargetPotential<Scalar> zero_phi(Index dim) {
  return {[](const Vector<Scalar>&) { return Scalar(0); },
          [](const Vector<Scalar>& q) -> Vector<Scalar> { return Vector<Scalar>::Zero(q.size()); },
          dim};
}

/// |C^{-1/2}(q + f(q))|^2, the Cameron-Martin norm of the shift a naive
/// (unpreconditioned) leapfrog kick would have to make absolutely continuous.
template <typename Scalar>
Scalar naive_splitting_statistic(const HilbertTarget<Scalar>& target, const Vector<Scalar>& q) {
  const Vector<Scalar> fq = target.surrogate_f ? target.surrogate_f(q) : Vector<Scalar>::Zero(q.size());
  return cm_norm_sq(target.reference, Vector<Scalar>(q + fq));
}

struct RefinementRow {
  Index dim;
  double naive_statistic;  // median |C^{-1/2}(q + f(q))|^2
  double abs_log_rn;       // median |log RN| of the Strang-splitting kernel
};

/// For each d, builds the target, draws q and v from mu0 `draws` times and
/// records the median of the naive-splitting Cameron-Martin statistic and of
/// |hilbert_log_rn| for the Strang kernel with (delta1, delta2, n).
template <typename Scalar>
std::vector<RefinementRow> leapfrog_refinement_probe(
    const std::function<HilbertTarget<Scalar>(Index)>& make_target, Scalar delta1, Scalar delta2,
    int n, const std::vector<Index>& dims, int draws, Rng& rng) {
  if (draws < 1) throw ConfigError("leapfrog_refinement_probe: draws must be positive");
  auto median = [](std::vector<double> x) {
    const std::size_t mid = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
    double m = x[mid];
    if (x.size() % 2 == 0) m = 0.5 * (m + *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid)));
    return m;
  };
  std::vector<RefinementRow> rows;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i > 0 && dims[i] <= dims[i - 1])
      throw ConfigError("leapfrog_refinement_probe: dimensions must increase");
    const HilbertTarget<Scalar> t = make_target(dims[i]);
    const auto law = AuxLaw<Scalar>::reference();
    std::vector<double> naive, lrn;
    naive.reserve(static_cast<std::size_t>(draws));
    lrn.reserve(static_cast<std::size_t>(draws));
    for (int k = 0; k < draws; ++k) {
      const Vector<Scalar> q = sample(t.reference, rng);
      const Vector<Scalar> v = sample(t.reference, rng);
      naive.push_back(static_cast<double>(naive_splitting_statistic(t, q)));
      lrn.push_back(std::abs(static_cast<double>(hilbert_log_rn(t, law, delta1, delta2, n, {q, v}))));
    }
    rows.push_back({dims[i], median(std::move(naive)), median(std::move(lrn))});
  }
  return rows;
}

}  // namespace invmh
