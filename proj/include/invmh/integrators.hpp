#pragma once

// Flow maps on the extended phase space and the integrators composed from
// them. Everything here is a pure function of (parameters, z).

#include "invmh/errors.hpp"
#include "invmh/jacobian.hpp"
#include "invmh/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace invmh {

namespace detail {

template <typename Scalar>
void require_finite(const ExtendedPoint<Scalar>& z, const char* where) {
  if (!z.all_finite()) throw DivergenceError(std::string(where) + ": non-finite state");
}

template <typename Scalar>
void require_steps(int n, const char* where) {
  if (n < 1) throw ConfigError(std::string(where) + ": need at least one step");
}

}  // namespace detail

/// (q, v + t f2(q))
template <typename Scalar, typename F2>
ExtendedPoint<Scalar> kick(Scalar t, const F2& f2, const ExtendedPoint<Scalar>& z) {
  return {z.q, z.v + t * f2(z.q)};
}

/// (q + t f1(v), v)
template <typename Scalar, typename F1>
ExtendedPoint<Scalar> drift(Scalar t, const F1& f1, const ExtendedPoint<Scalar>& z) {
  return {z.q + t * f1(z.v), z.v};
}

/// Exact flow of dq/dt = v, dv/dt = -q.
template <typename Scalar>
ExtendedPoint<Scalar> rotation(Scalar t, const ExtendedPoint<Scalar>& z) {
  if (z.q.size() != z.v.size()) throw ConfigError("rotation: q and v differ in dimension");
  const Scalar c = std::cos(t), s = std::sin(t);
  return {c * z.q + s * z.v, -s * z.q + c * z.v};
}

/// (q, v - t f(q))
template <typename Scalar, typename F>
ExtendedPoint<Scalar> precond_kick(Scalar t, const F& f, const ExtendedPoint<Scalar>& z) {
  return {z.q, z.v - t * f(z.q)};
}

template <typename Scalar>
ExtendedPoint<Scalar> momentum_flip(const ExtendedPoint<Scalar>& z) {
  return {z.q, -z.v};
}

/// (kick_{d1} o drift_{d2} o kick_{d1})^n with separable f1(v), f2(q).
template <typename Scalar, typename F1, typename F2>
ExtendedPoint<Scalar> leapfrog(int n, Scalar delta1, Scalar delta2, const F1& f1, const F2& f2,
                               ExtendedPoint<Scalar> z) {
  detail::require_steps<Scalar>(n, "leapfrog");
  for (int i = 0; i < n; ++i) {
    z = kick(delta1, f2, z);
    z = drift(delta2, f1, z);
    z = kick(delta1, f2, z);
    detail::require_finite(z, "leapfrog");
  }
  return z;
}

/// States z_0..z_n of a Strang trajectory; z_i after i full steps.
template <typename Scalar>
struct Trajectory {
  std::vector<ExtendedPoint<Scalar>> states;

  const ExtendedPoint<Scalar>& front() const { return states.front(); }
  const ExtendedPoint<Scalar>& back() const { return states.back(); }
  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

/// (precond_kick_{d1} o rotation_{d2} o precond_kick_{d1})^n, recording every
/// intermediate state.
template <typename Scalar, typename F>
Trajectory<Scalar> strang_hilbert(int n, Scalar delta1, Scalar delta2, const F& f,
                                  const ExtendedPoint<Scalar>& z) {
  detail::require_steps<Scalar>(n, "strang_hilbert");
  Trajectory<Scalar> traj;
  traj.states.reserve(static_cast<std::size_t>(n) + 1);
  traj.states.push_back(z);
  ExtendedPoint<Scalar> cur = z;
  for (int i = 0; i < n; ++i) {
    cur = precond_kick(delta1, f, cur);
    cur = rotation(delta2, cur);
    cur = precond_kick(delta1, f, cur);
    detail::require_finite(cur, "strang_hilbert");
    traj.states.push_back(cur);
  }
  return traj;
}

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 100;
};

namespace detail {

/// x = g(x) from x0. Converged once |x_{k+1} - x_k|_inf <= tol (1 + |x_{k+1}|_inf);
/// iteration then continues while the update keeps shrinking, so the
/// solution is accurate to rounding rather than to tol. Finite-difference
/// Jacobians of the resulting map depend on that.
template <typename Scalar, typename G>
Vector<Scalar> fixed_point(const G& g, Vector<Scalar> x, const FixedPointOptions& opts,
                           const char* where) {
  constexpr int kPolishIterations = 20;
  Scalar residual = kInf<Scalar>;
  int polish = -1;
  for (int it = 0; it < opts.max_iter + kPolishIterations; ++it) {
    if (polish < 0 && it >= opts.max_iter) break;
    Vector<Scalar> next = g(x);
    if (!next.allFinite()) {
      if (polish >= 0) return x;
      throw DivergenceError(std::string(where) + ": non-finite iterate");
    }
    const Scalar update = x.size() ? (next - x).cwiseAbs().maxCoeff() : Scalar(0);
    if (polish >= 0) {
      if (!(update < residual)) return x;
      residual = update;
      x = std::move(next);
      if (update == Scalar(0) || ++polish >= kPolishIterations) return x;
      continue;
    }
    residual = update;
    const Scalar scale = Scalar(1) + (next.size() ? next.cwiseAbs().maxCoeff() : Scalar(0));
    x = std::move(next);
    if (residual <= Scalar(opts.tol) * scale) {
      if (residual == Scalar(0)) return x;
      polish = 0;
    }
  }
  if (polish >= 0) return x;
  throw ConvergenceError(std::string(where) + ": fixed-point iteration did not converge",
                         static_cast<double>(residual));
}

}  // namespace detail

/// Euler-B: v = v_bar + delta f2(q_bar, v) (implicit), q = q_bar + delta f1(q_bar, v).
template <typename Scalar, typename F1, typename F2>
ExtendedPoint<Scalar> euler_b_step(Scalar delta, const F1& f1, const F2& f2,
                                   const ExtendedPoint<Scalar>& z,
                                   const FixedPointOptions& opts = {}) {
  const Vector<Scalar> v0 = z.v + delta * f2(z.q, z.v);
  Vector<Scalar> v = detail::fixed_point<Scalar>(
      [&](const Vector<Scalar>& w) -> Vector<Scalar> { return z.v + delta * f2(z.q, w); }, v0,
      opts, "euler_b_step");
  Vector<Scalar> q = z.q + delta * f1(z.q, v);
  ExtendedPoint<Scalar> out{std::move(q), std::move(v)};
  detail::require_finite(out, "euler_b_step");
  return out;
}

/// Euler-A: q = q_bar + delta f1(q, v_bar) (implicit), v = v_bar + delta f2(q, v_bar).
template <typename Scalar, typename F1, typename F2>
ExtendedPoint<Scalar> euler_a_step(Scalar delta, const F1& f1, const F2& f2,
                                   const ExtendedPoint<Scalar>& z,
                                   const FixedPointOptions& opts = {}) {
  const Vector<Scalar> q0 = z.q + delta * f1(z.q, z.v);
  Vector<Scalar> q = detail::fixed_point<Scalar>(
      [&](const Vector<Scalar>& x) -> Vector<Scalar> { return z.q + delta * f1(x, z.v); }, q0,
      opts, "euler_a_step");
  Vector<Scalar> v = z.v + delta * f2(q, z.v);
  ExtendedPoint<Scalar> out{std::move(q), std::move(v)};
  detail::require_finite(out, "euler_a_step");
  return out;
}

/// Generalized Stormer-Verlet, (euler_a_{delta/2} o euler_b_{delta/2})^n.
template <typename Scalar, typename F1, typename F2>
ExtendedPoint<Scalar> stormer_verlet(int n, Scalar delta, const F1& f1, const F2& f2,
                                     ExtendedPoint<Scalar> z,
                                     const FixedPointOptions& opts = {}) {
  detail::require_steps<Scalar>(n, "stormer_verlet");
  const Scalar h = delta / Scalar(2);
  for (int i = 0; i < n; ++i) {
    z = euler_b_step(h, f1, f2, z, opts);
    z = euler_a_step(h, f1, f2, z, opts);
  }
  return z;
}

/// A one-parameter family of phase-space maps, t the signed step.
template <typename Scalar>
struct FlowMap {
  std::function<ExtendedPoint<Scalar>(Scalar, const ExtendedPoint<Scalar>&)> forward;
  std::string name = "flow";

  ExtendedPoint<Scalar> operator()(Scalar t, const ExtendedPoint<Scalar>& z) const {
    return forward(t, z);
  }
};

template <typename Scalar>
FlowMap<Scalar> kick_flow(VectorField<Scalar> f2) {
  return {[f2 = std::move(f2)](Scalar t, const ExtendedPoint<Scalar>& z) { return kick(t, f2, z); },
          "kick"};
}

template <typename Scalar>
FlowMap<Scalar> drift_flow(VectorField<Scalar> f1) {
  return {[f1 = std::move(f1)](Scalar t, const ExtendedPoint<Scalar>& z) { return drift(t, f1, z); },
          "drift"};
}

template <typename Scalar>
FlowMap<Scalar> rotation_flow() {
  return {[](Scalar t, const ExtendedPoint<Scalar>& z) { return rotation(t, z); }, "rotation"};
}

template <typename Scalar>
FlowMap<Scalar> precond_kick_flow(VectorField<Scalar> f) {
  return {[f = std::move(f)](Scalar t, const ExtendedPoint<Scalar>& z) {
            return precond_kick(t, f, z);
          },
          "precond_kick"};
}

template <typename Scalar>
struct Stage {
  FlowMap<Scalar> flow;
  Scalar t;
};

/// How the middle of a palindrome is treated. Doubled: s1..sk sk..s1, so a
/// single stage is applied twice and (kick_{d1}, drift_{d2/2}) is one
/// leapfrog step. Single: s1..sk..s1 with sk once.
enum class PalindromeCenter { Doubled, Single };

/// n-fold palindromic composition of the stages; the first stage listed is
/// the first applied.
template <typename Scalar>
PhaseMap<Scalar> palindromic_compose(std::vector<Stage<Scalar>> stages, int n = 1,
                                     PalindromeCenter center = PalindromeCenter::Doubled) {
  if (stages.empty()) throw ConfigError("palindromic_compose: no stages");
  detail::require_steps<Scalar>(n, "palindromic_compose");
  return [stages = std::move(stages), n, center](const ExtendedPoint<Scalar>& z0) {
    ExtendedPoint<Scalar> z = z0;
    const std::size_t k = stages.size();
    for (int rep = 0; rep < n; ++rep) {
      for (std::size_t i = 0; i < k; ++i) z = stages[i].flow(stages[i].t, z);
      const std::size_t start = center == PalindromeCenter::Doubled ? k : k - 1;
      for (std::size_t i = start; i-- > 0;) z = stages[i].flow(stages[i].t, z);
      detail::require_finite(z, "palindromic_compose");
    }
    return z;
  };
}

struct ReversibilityReport {
  double max_residual = 0.0;
  bool passed = true;
};

/// max over points of |R(map(R(map(z)))) - z|_inf. A map that throws at a
/// point counts as an infinite residual.
template <typename Scalar, typename Map, typename Flip>
ReversibilityReport check_reversibility(const Map& map, const Flip& flip,
                                        std::span<const ExtendedPoint<Scalar>> points,
                                        double tol) {
  ReversibilityReport report;
  for (const auto& z : points) {
    double r;
    try {
      const ExtendedPoint<Scalar> back = flip(map(flip(map(z))));
      r = back.all_finite() ? static_cast<double>(max_abs_diff(back, z))
                            : std::numeric_limits<double>::infinity();
    } catch (const DivergenceError&) {
      r = std::numeric_limits<double>::infinity();
    } catch (const ConvergenceError&) {
      r = std::numeric_limits<double>::infinity();
    }
    report.max_residual = std::max(report.max_residual, r);
  }
  report.passed = report.max_residual <= tol;
  return report;
}

template <typename Scalar, typename Map, typename Flip>
ReversibilityReport check_reversibility(const Map& map, const Flip& flip,
                                        const std::vector<ExtendedPoint<Scalar>>& points,
                                        double tol) {
  return check_reversibility<Scalar>(map, flip, std::span<const ExtendedPoint<Scalar>>(points),
                                     tol);
}

}  // namespace invmh
