#pragma once

// Structural checks shared by the sampler tests and the acceptance binary.

#include "invmh/core.hpp"

#include <algorithm>
#include <cmath>

namespace checks {

using Vec = Eigen::VectorXd;
using Point = invmh::ExtendedPoint<double>;

struct InvolutionReport {
  double max_involution = 0.0;  // |S(S(z)) - z|_inf
  double max_skew = 0.0;        // |log_rn(z) + log_rn(S z)|
  int finite_points = 0;
};

/// z = (q, v) with q from `draw_q` and v from the kernel's own auxiliary law.
template <typename DrawQ>
InvolutionReport involution_report(const invmh::InvolutiveKernel<double>& k, int points,
                                   DrawQ draw_q, invmh::Rng& rng) {
  InvolutionReport r;
  for (int i = 0; i < points; ++i) {
    const Vec q = draw_q(rng);
    const Point z{q, k.aux().sample(q, rng)};
    const auto p = k.involution()(z);
    if (!std::isfinite(p.log_rn)) continue;
    const auto pp = k.involution()(p.image);
    ++r.finite_points;
    r.max_involution = std::max(r.max_involution, invmh::max_abs_diff(pp.image, z));
    r.max_skew = std::max(r.max_skew, std::abs(p.log_rn + pp.log_rn));
  }
  return r;
}

inline auto normal_q(invmh::Index d, double scale = 1.0) {
  return [d, scale](invmh::Rng& rng) -> Vec { return scale * invmh::standard_normal<double>(d, rng); };
}

/// U(q) = 1/2 |q|^2 + 0.1 sum q_i^4 + 0.2 q_0 q_1 (last term when d >= 2).
inline invmh::TargetPotential<double> smooth_target(invmh::Index d) {
  return {[](const Vec& q) {
            double u = 0.5 * q.squaredNorm() + 0.1 * q.array().pow(4).sum();
            if (q.size() >= 2) u += 0.2 * q[0] * q[1];
            return u;
          },
          [](const Vec& q) -> Vec {
            Vec g = q + 0.4 * q.array().cube().matrix();
            if (q.size() >= 2) {
              g[0] += 0.2 * q[1];
              g[1] += 0.2 * q[0];
            }
            return g;
          },
          d};
}

inline invmh::TargetPotential<double> gaussian_target(const Vec& variances) {
  return {[variances](const Vec& q) { return 0.5 * q.cwiseAbs2().cwiseQuotient(variances).sum(); },
          [variances](const Vec& q) -> Vec { return q.cwiseQuotient(variances); }, variances.size()};
}

}  // namespace checks
