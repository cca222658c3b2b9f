#pragma once

// Involutive Metropolis-Hastings kernels.
//
// One step: draw v ~ V(q, .), map z = (q, v) through an involution S on the
// extended space, accept the position part of S(z) with probability
// 1 ^ dS*M/dM(z), where M(dq, dv) = V(q, dv) mu(dq). Everything is carried in
// log space; normalizing constants never appear.

#include "invmh/errors.hpp"
#include "invmh/jacobian.hpp"
#include "invmh/types.hpp"

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace invmh {

/// Negative log of an unnormalized density, U(q) (or Phi(q) on a Gaussian
/// reference). +inf encodes zero density; grad is optional.
template <typename Scalar>
struct TargetPotential {
  std::function<Scalar(const Vector<Scalar>&)> eval;
  VectorField<Scalar> grad;
  Index dim = 0;

  bool has_grad() const { return static_cast<bool>(grad); }

  /// eval with NaN mapped to +inf, so a malformed potential reads as zero
  /// density rather than poisoning the acceptance ratio.
  Scalar operator()(const Vector<Scalar>& q) const {
    const Scalar u = eval(q);
    return std::isnan(u) ? kInf<Scalar> : u;
  }
};

/// The auxiliary law V(q, dv): a sampler plus its contribution to the
/// extended log-density (-K(q,v) - ln Z_K(q), or -H~(q,v) on a Gaussian
/// reference).
template <typename Scalar>
struct AuxiliaryKernel {
  std::function<Vector<Scalar>(const Vector<Scalar>&, Rng&)> sample;
  std::function<Scalar(const Vector<Scalar>&, const Vector<Scalar>&)> log_density;
  Index dim = 0;
};

/// S(z) together with log dS*M/dM at z.
template <typename Scalar>
struct Proposal {
  ExtendedPoint<Scalar> image;
  Scalar log_rn;
};

/// An involution on the extended space paired with its log Radon-Nikodym
/// derivative. Both are produced by one evaluation because for trajectory
/// methods the derivative consumes the same intermediate states.
///
/// Maps that diverge report {z, -inf}: the point is rejected and S stays an
/// involution on the rejected set.
template <typename Scalar>
class Involution {
 public:
  using Map = std::function<Proposal<Scalar>(const ExtendedPoint<Scalar>&)>;

  Involution() = default;
  explicit Involution(Map map) : map_(std::move(map)) {}

  Proposal<Scalar> operator()(const ExtendedPoint<Scalar>& z) const { return map_(z); }
  ExtendedPoint<Scalar> apply(const ExtendedPoint<Scalar>& z) const { return map_(z).image; }
  Scalar log_rn(const ExtendedPoint<Scalar>& z) const { return map_(z).log_rn; }
  explicit operator bool() const { return static_cast<bool>(map_); }

 private:
  Map map_;
};

/// Wraps a map that may throw on divergence into the {z, -inf} convention.
template <typename Scalar, typename F>
Involution<Scalar> guarded_involution(F map) {
  return Involution<Scalar>([map = std::move(map)](const ExtendedPoint<Scalar>& z) {
    try {
      Proposal<Scalar> p = map(z);
      if (!p.image.all_finite()) return Proposal<Scalar>{z, -kInf<Scalar>};
      return p;
    } catch (const DivergenceError&) {
      return Proposal<Scalar>{z, -kInf<Scalar>};
    } catch (const ConvergenceError&) {
      return Proposal<Scalar>{z, -kInf<Scalar>};
    }
  });
}

/// The triple (mu, V, S). Immutable once built; safe to share across threads.
template <typename Scalar>
class InvolutiveKernel {
 public:
  InvolutiveKernel(TargetPotential<Scalar> target, AuxiliaryKernel<Scalar> aux,
                   Involution<Scalar> involution, std::string name = "kernel")
      : target_(std::move(target)),
        aux_(std::move(aux)),
        involution_(std::move(involution)),
        name_(std::move(name)) {
    if (!target_.eval) throw ConfigError(name_ + ": target potential is empty");
    if (!aux_.sample || !aux_.log_density) throw ConfigError(name_ + ": auxiliary kernel is empty");
    if (!involution_) throw ConfigError(name_ + ": involution is empty");
    if (target_.dim <= 0) throw ConfigError(name_ + ": target dimension must be positive");
    if (aux_.dim <= 0) aux_.dim = target_.dim;
  }

  const TargetPotential<Scalar>& target() const { return target_; }
  const AuxiliaryKernel<Scalar>& aux() const { return aux_; }
  const Involution<Scalar>& involution() const { return involution_; }
  Index dim() const { return target_.dim; }
  const std::string& name() const { return name_; }

  /// log of the (unnormalized) extended density, -U(q) + log V(q, v).
  Scalar extended_log_density(const Vector<Scalar>& q, const Vector<Scalar>& v) const {
    return -target_(q) + aux_.log_density(q, v);
  }

 private:
  TargetPotential<Scalar> target_;
  AuxiliaryKernel<Scalar> aux_;
  Involution<Scalar> involution_;
  std::string name_;
};

template <typename Scalar>
struct StepResult {
  Vector<Scalar> proposal;
  Scalar alpha;
  bool accepted;
  Vector<Scalar> next;
};

/// 1 ^ exp(log_rn), with NaN and -inf read as certain rejection.
template <typename Scalar>
Scalar accept_prob(Scalar log_rn) {
  if (std::isnan(log_rn) || log_rn == -kInf<Scalar>) return Scalar(0);
  if (log_rn >= Scalar(0)) return Scalar(1);
  return std::exp(log_rn);
}

namespace detail {

template <typename Scalar>
Scalar uniform01(Rng& rng) {
  return std::uniform_real_distribution<Scalar>(Scalar(0), Scalar(1))(rng);
}

}  // namespace detail

/// One Metropolis step. Consumes exactly one auxiliary draw and one uniform,
/// whatever the outcome, so chains replay bit-for-bit.
template <typename Scalar>
StepResult<Scalar> mh_step(const InvolutiveKernel<Scalar>& kernel, const Vector<Scalar>& q,
                           Rng& rng) {
  if (q.size() != kernel.dim())
    throw ConfigError(kernel.name() + ": state has dimension " + std::to_string(q.size()) +
                      ", kernel expects " + std::to_string(kernel.dim()));
  ExtendedPoint<Scalar> z{q, kernel.aux().sample(q, rng)};
  Proposal<Scalar> p = kernel.involution()(z);
  const Scalar alpha = accept_prob(p.log_rn);
  const bool accepted = detail::uniform01<Scalar>(rng) < alpha;
  Vector<Scalar> next = accepted ? p.image.q : q;
  return {std::move(p.image.q), alpha, accepted, std::move(next)};
}

template <typename Scalar>
struct StepSummary {
  Scalar alpha;
  bool accepted;
};

/// states has n_steps + 1 rows; row 0 is the initial point.
template <typename Scalar>
struct Chain {
  Matrix<Scalar> states;
  std::vector<StepSummary<Scalar>> steps;

  double acceptance_rate() const {
    if (steps.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& s : steps) n += s.accepted ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(steps.size());
  }
};

template <typename Scalar>
Chain<Scalar> run_chain(const InvolutiveKernel<Scalar>& kernel, const Vector<Scalar>& q0,
                        std::size_t n_steps, Rng& rng) {
  if (q0.size() != kernel.dim())
    throw ConfigError(kernel.name() + ": initial state has the wrong dimension");
  Chain<Scalar> chain;
  chain.states.resize(static_cast<Index>(n_steps) + 1, q0.size());
  chain.states.row(0) = q0.transpose();
  chain.steps.reserve(n_steps);
  Vector<Scalar> q = q0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    StepResult<Scalar> r = mh_step(kernel, q, rng);
    chain.steps.push_back({r.alpha, r.accepted});
    q = std::move(r.next);
    chain.states.row(static_cast<Index>(k) + 1) = q.transpose();
  }
  return chain;
}

/// The unique involution generated by a proposal map F(q, .) that is
/// invertible in v:  S(q, v) = (F(q, v), F(F(q, v), .)^{-1}(q)).
///
/// `inverse_in_v(q, q_tilde)` must return the v with F(q, v) = q_tilde.
template <typename Scalar = double, typename F, typename FInv>
PhaseMap<Scalar> involution_from_proposal_map(F proposal_map, FInv inverse_in_v) {
  return [proposal_map = std::move(proposal_map),
          inverse_in_v = std::move(inverse_in_v)](const ExtendedPoint<Scalar>& z) {
    Vector<Scalar> q_tilde = proposal_map(z.q, z.v);
    Vector<Scalar> v_back = inverse_in_v(q_tilde, z.q);
    return ExtendedPoint<Scalar>{std::move(q_tilde), std::move(v_back)};
  };
}

/// Brute-force log dS*M/dM for a finite-dimensional extended density rho:
///   log rho(S z) - log rho(z) + log|det grad S(z)|,
/// with the Jacobian by central differences. Independent of every closed-form
/// acceptance formula in the library; use it to check them.
template <typename Scalar, typename Density, typename Map>
Scalar generic_log_rn(const Density& ext_log_density, const Map& involution,
                      const ExtendedPoint<Scalar>& z, Index jacobian_cap = kDefaultJacobianCap) {
  const Scalar log_rho_z = ext_log_density(z.q, z.v);
  if (!std::isfinite(log_rho_z)) return -kInf<Scalar>;
  ExtendedPoint<Scalar> sz;
  try {
    sz = involution(z);
  } catch (const DivergenceError&) {
    return -kInf<Scalar>;
  } catch (const ConvergenceError&) {
    return -kInf<Scalar>;
  }
  if (!sz.all_finite()) return -kInf<Scalar>;
  const Scalar log_rho_sz = ext_log_density(sz.q, sz.v);
  const Scalar log_det = numerical_logdet_jacobian(involution, z, std::optional<Scalar>{}, jacobian_cap);
  const Scalar out = log_rho_sz - log_rho_z + log_det;
  return std::isnan(out) ? -kInf<Scalar> : out;
}

/// Swap involution S(q, v) = (v, q).
template <typename Scalar>
ExtendedPoint<Scalar> swap_halves(const ExtendedPoint<Scalar>& z) {
  return {z.v, z.q};
}

/// Classical Metropolis-Hastings as an involutive kernel: V(q, .) is the
/// proposal law and S swaps current and proposed states, which reproduces the
/// Hastings ratio p(q~) r(q~, q) / (p(q) r(q, q~)).
///
/// log_p: log target density (unnormalized). proposal_log_density(q, q~):
/// log proposal density. proposal_sampler(q, rng): a draw from it.
template <typename Scalar, typename LogP, typename LogR, typename Sampler>
InvolutiveKernel<Scalar> classic_mh_kernel(LogP log_p, LogR proposal_log_density,
                                           Sampler proposal_sampler, Index dim) {
  TargetPotential<Scalar> target{[log_p](const Vector<Scalar>& q) { return -log_p(q); }, {}, dim};
  AuxiliaryKernel<Scalar> aux{
      [proposal_sampler](const Vector<Scalar>& q, Rng& rng) -> Vector<Scalar> {
        return proposal_sampler(q, rng);
      },
      [proposal_log_density](const Vector<Scalar>& q, const Vector<Scalar>& v) -> Scalar {
        return proposal_log_density(q, v);
      },
      dim};
  auto map = [log_p, proposal_log_density](const ExtendedPoint<Scalar>& z) {
    const Scalar forward = log_p(z.q) + proposal_log_density(z.q, z.v);
    const Scalar backward = log_p(z.v) + proposal_log_density(z.v, z.q);
    Scalar log_rn = backward - forward;
    if (std::isnan(log_rn)) log_rn = -kInf<Scalar>;
    return Proposal<Scalar>{swap_halves(z), log_rn};
  };
  return InvolutiveKernel<Scalar>(std::move(target), std::move(aux),
                                  guarded_involution<Scalar>(std::move(map)), "classic_mh");
}

template <typename Scalar>
struct MixtureStepResult : StepResult<Scalar> {
  std::size_t kernel_index;
};

/// Metropolis-Hastings-Green mixture: choose kernel j with probability
/// kappa_j(q), then accept with 1 ^ [dS_j*M/dM * kappa_j(q~) / kappa_j(q)].
/// `weights(q)` returns the vector kappa(q) on the simplex.
template <typename Scalar, typename Weights>
MixtureStepResult<Scalar> mixture_step(std::span<const InvolutiveKernel<Scalar>> kernels,
                                       const Weights& weights, const Vector<Scalar>& q,
                                       Rng& rng) {
  if (kernels.empty()) throw ConfigError("mixture_step: empty kernel list");
  auto check = [&](const Vector<Scalar>& w) {
    if (static_cast<std::size_t>(w.size()) != kernels.size())
      throw ConfigError("mixture_step: weight vector size does not match kernel count");
    if ((w.array() < Scalar(0)).any() || !w.allFinite())
      throw ConfigError("mixture_step: weights must be finite and non-negative");
    if (std::abs(w.sum() - Scalar(1)) > Scalar(1e-9))
      throw ConfigError("mixture_step: weights must sum to one");
  };
  const Vector<Scalar> w_here = weights(q);
  check(w_here);

  const Scalar u = detail::uniform01<Scalar>(rng);
  std::size_t j = 0;
  Scalar cumulative(0);
  for (; j + 1 < kernels.size(); ++j) {
    cumulative += w_here[static_cast<Index>(j)];
    if (u < cumulative && w_here[static_cast<Index>(j)] > Scalar(0)) break;
  }
  // Land on a kernel with positive weight even under rounding at the top end.
  while (w_here[static_cast<Index>(j)] <= Scalar(0) && j > 0) --j;

  const auto& kernel = kernels[j];
  if (q.size() != kernel.dim()) throw ConfigError("mixture_step: dimension mismatch");
  ExtendedPoint<Scalar> z{q, kernel.aux().sample(q, rng)};
  Proposal<Scalar> p = kernel.involution()(z);
  Scalar log_ratio = p.log_rn;
  if (std::isfinite(log_ratio)) {
    const Vector<Scalar> w_there = weights(p.image.q);
    const Scalar kj = w_there.size() == w_here.size() ? w_there[static_cast<Index>(j)] : Scalar(0);
    log_ratio += std::log(kj) - std::log(w_here[static_cast<Index>(j)]);
  }
  const Scalar alpha = accept_prob(log_ratio);
  const bool accepted = detail::uniform01<Scalar>(rng) < alpha;
  MixtureStepResult<Scalar> out;
  out.next = accepted ? p.image.q : q;
  out.proposal = std::move(p.image.q);
  out.alpha = alpha;
  out.accepted = accepted;
  out.kernel_index = j;
  return out;
}

}  // namespace invmh
