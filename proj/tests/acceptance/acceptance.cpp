// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include "invmh/diagnostics.hpp"
#include "invmh/samplers_fd.hpp"
#include "invmh/samplers_hilbert.hpp"

#include "kernel_checks.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace invmh;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Point = ExtendedPoint<double>;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

struct Named {
  std::string name;
  InvolutiveKernel<double> kernel;
  std::function<Vec(Rng&)> draw_q;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

VectorField<double> zero_field() {
  return [](const Vec& q) -> Vec { return Vec::Zero(q.size()); };
}

VectorField<double> identity_field() {
  return [](const Vec& v) -> Vec { return v; };
}

VectorField<double> scaled_neg_grad(const TargetPotential<double>& u, double s) {
  return [g = u.grad, s](const Vec& q) -> Vec { return -s * g(q); };
}

/// f(q) = A q + tanh(q) with a fixed random A: a force unrelated to Phi.
VectorField<double> arbitrary_force(Index d, std::uint64_t seed) {
  Rng rng(seed);
  Mat a(d, d);
  for (Index i = 0; i < d; ++i) a.col(i) = 0.3 * standard_normal<double>(d, rng);
  return [a](const Vec& q) -> Vec { return a * q + q.array().tanh().matrix(); };
}

std::vector<Named> fd_kernels(const TargetPotential<double>& u) {
  const Index d = u.dim;
  auto normal = checks::normal_q(d);
  std::vector<Named> out;
  out.push_back({"rwmc", rwmc(u, gaussian_jump<double>(d, 0.3)), normal});
  out.push_back({"mala", mala(u, 0.3), normal});
  out.push_back({"hmc", hmc(u, HmcConfig<double>{0.1, 10, {}}), normal});
  out.push_back({"relativistic_hmc", relativistic_hmc(u, 1.0, 1.0, HmcConfig<double>{0.1, 10, {}}), normal});
  out.push_back({"rmhmc", rmhmc(u, one_plus_q2_metric<double>(), 0.1, 5), normal});
  LeapfrogScheme<double> lf{0.05, 0.1, identity_field(), scaled_neg_grad(u, 1.5)};
  out.push_back({"surrogate_hmc/leapfrog",
                 surrogate_hmc(u, gaussian_momentum<double>(d), SurrogateScheme<double>(lf), 10), normal});
  return out;
}

std::vector<Named> hilbert_kernels(const HilbertTarget<double>& t) {
  auto mu0 = [g = t.reference](Rng& rng) { return sample(g, rng); };
  const Vec lam = t.reference.eigenvalues();
  VectorField<double> k = [lam](const Vec&) -> Vec { return 0.8 * lam; };
  const auto geometric = make_hilbert_target(t.phi, t.reference, geometric_surrogate(t.phi, t.reference, k));
  std::vector<Named> out;
  out.push_back({"pcn", pcn_from_delta(t, 0.5), mu0});
  out.push_back({"inf_mala", inf_mala(t, 0.5), mu0});
  out.push_back({"inf_hmc", inf_hmc(t, AuxLaw<double>::reference(), 0.25, 0.5, 5), mu0});
  out.push_back({"inf_hmc/geometric", inf_hmc(geometric, AuxLaw<double>::diagonal(k), 0.25, 0.5, 5), mu0});
  out.push_back({"gen_langevin", gen_langevin(t, arbitrary_force(t.dim(), 99), 0.5), mu0});
  return out;
}

std::vector<Named> all_kernels() {
  const Index d = 20;
  auto out = fd_kernels(checks::smooth_target(d));
  // Implicit, non-volume-preserving scheme: needs the numerical Jacobian,
  // so a lower dimension.
  const auto u5 = checks::smooth_target(5);
  StormerVerletScheme<double> sv{0.1, [](const Vec&, const Vec& v) -> Vec { return v; },
                                 [g = u5.grad](const Vec& q, const Vec& v) -> Vec {
                                   return -g(q) - 0.2 * v.cwiseAbs2().cwiseProduct(q);
                                 }};
  out.push_back({"surrogate_hmc/stormer_verlet",
                 surrogate_hmc(u5, gaussian_momentum<double>(5), SurrogateScheme<double>(sv), 4,
                               SurrogateOptions{false}),
                 checks::normal_q(5)});
  for (auto& k : hilbert_kernels(make_hilbert_target(quartic_phi<double>(d), SpectralGaussian<double>::power_law(d, 1.0, 2.0))))
    out.push_back(std::move(k));
  return out;
}

// ---- criteria ---------------------------------------------------------------

Outcome involution_and_skew(bool skew) {
  double worst = 0.0;
  std::string worst_name;
  int min_finite = 1000;
  for (const auto& k : all_kernels()) {
    Rng rng(1);
    const auto r = checks::involution_report(k.kernel, 1000, k.draw_q, rng);
    const double v = skew ? r.max_skew : r.max_involution;
    if (v >= worst) {
      worst = v;
      worst_name = k.name;
    }
    min_finite = std::min(min_finite, r.finite_points);
  }
  const bool ok = worst <= 1e-8 && min_finite >= 900;
  return {ok, std::string(skew ? "max |log_rn(z) + log_rn(Sz)| = " : "max |S(S(z)) - z| = ") + fmt(worst) +
                  " (" + worst_name + "), limit 1e-8; min finite points " + std::to_string(min_finite) +
                  "/1000 over 11 kernels"};
}

Outcome oracle_equivalence() {
  double worst = 0.0;
  std::string where;
  auto note = [&](double err, const std::string& name) {
    if (!(err <= worst)) {
      worst = err;
      where = name;
    }
  };
  Rng rng(3);
  {
    const auto u = checks::smooth_target(3);
    auto k = mala(u, 0.5);
    auto rho = [&](const Vec& q, const Vec& v) { return -u(q) - 0.5 * v.squaredNorm(); };
    auto s = [&](const Point& z) { return k.involution().apply(z); };
    for (int i = 0; i < 100; ++i) {
      const Point z{standard_normal<double>(3, rng), standard_normal<double>(3, rng)};
      const Point sz = s(z);
      note(std::abs(mala_log_hastings(u, 0.5, z.q, sz.q) - generic_log_rn<double>(rho, s, z)), "mala");
    }
  }
  {
    const auto u = checks::smooth_target(3);
    auto k = hmc(u, HmcConfig<double>{0.15, 6, {}});
    auto rho = [&](const Vec& q, const Vec& v) { return -u(q) - 0.5 * v.squaredNorm(); };
    auto s = [&](const Point& z) { return k.involution().apply(z); };
    for (int i = 0; i < 100; ++i) {
      const Point z{standard_normal<double>(3, rng), standard_normal<double>(3, rng)};
      note(std::abs(k.involution().log_rn(z) - generic_log_rn<double>(rho, s, z)), "hmc");
    }
  }
  {
    const auto u = checks::smooth_target(1);
    auto k = rmhmc(u, one_plus_q2_metric<double>(), 0.2, 4);
    auto rho = [&](const Vec& q, const Vec& v) {
      const double m = 1 + q[0] * q[0];
      return -u(q) - 0.5 * v[0] * v[0] / m - 0.5 * std::log(m);
    };
    auto s = [&](const Point& z) { return k.involution().apply(z); };
    for (int i = 0; i < 100; ++i) {
      const Point z{standard_normal<double>(1, rng), standard_normal<double>(1, rng)};
      note(std::abs(k.involution().log_rn(z) - generic_log_rn<double>(rho, s, z)), "rmhmc");
    }
  }
  for (int i = 0; i < 100; ++i) {
    const Index d = 1 + i % 4;
    const int n = 1 + (i / 4) % 4;
    const auto g = SpectralGaussian<double>::power_law(d, 1.5, 1.5);
    const auto t = make_hilbert_target(quartic_phi<double>(d), g, arbitrary_force(d, 7 + i));
    const Vec lam = g.eigenvalues();
    const auto law = i % 2 ? AuxLaw<double>::reference() : AuxLaw<double>::diagonal([lam](const Vec& q) -> Vec {
      return lam.cwiseProduct((1.0 + 0.5 * q.array().square() / (1.0 + q.array().square())).matrix());
    });
    auto k = inf_hmc(t, law, 0.2, 0.4, n);
    auto rho = [&](const Vec& q, const Vec& v) {
      return -t.phi(q) - 0.5 * cm_norm_sq(g, q) - h_tilde(law, g, q, v) - 0.5 * cm_norm_sq(g, v);
    };
    auto s = [&](const Point& z) { return k.involution().apply(z); };
    const Point z{sample(g, rng), sample(g, rng)};
    const Trajectory<double> traj = strang_hilbert(n, 0.2, 0.4, t.surrogate_f, z);
    note(std::abs(hilbert_log_rn(t, law, 0.2, traj) - generic_log_rn<double>(rho, s, z)), "hilbert_log_rn");
  }
  return {worst <= 1e-5, "max |closed form - generic_log_rn| = " + fmt(worst) + " (" + where +
                             "), limit 1e-5; 100 points each for mala, hmc, rmhmc (d=1), hilbert_log_rn (d<=4, n<=4)"};
}

Outcome volume_preservation() {
  double worst = 0.0;
  Rng rng(4);
  const auto u = checks::smooth_target(3);
  auto lf = [f2 = scaled_neg_grad(u, 1.0)](const Point& z) { return leapfrog(5, 0.1, 0.2, identity_field(), f2, z); };
  const auto metric = one_plus_q2_metric<double>();
  auto f1 = [](const Vec& q, const Vec& v) -> Vec { return v.cwiseQuotient(Vec::Ones(q.size()) + q.cwiseAbs2()); };
  auto f2 = [&](const Vec& q, const Vec& v) -> Vec {
    return -(u.grad(q) + metric.grad_quadratic(q, v) + metric.grad_half_logdet(q));
  };
  auto sv = [&](const Point& z) { return stormer_verlet(5, 0.2, f1, f2, z); };
  for (int i = 0; i < 100; ++i) {
    const Index d = 1 + i % 3;
    const Point z{standard_normal<double>(d, rng), standard_normal<double>(d, rng)};
    worst = std::max({worst, std::abs(numerical_logdet_jacobian(lf, z)), std::abs(numerical_logdet_jacobian(sv, z))});
  }
  return {worst <= 1e-5, "max |log|det grad S^|| = " + fmt(worst) + " over leapfrog and Stormer-Verlet, d<=3, limit 1e-5"};
}

Outcome reversibility() {
  Rng rng(5);
  std::vector<Point> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({standard_normal<double>(3, rng), standard_normal<double>(3, rng)});
  const auto u = checks::smooth_target(3);
  const auto f2 = scaled_neg_grad(u, 1.0);
  VectorField<double> odd = [](const Vec& v) -> Vec { return v + 0.3 * v.array().sin().matrix(); };
  auto g1 = [](const Vec& q, const Vec& v) -> Vec { return v.cwiseQuotient(Vec::Ones(q.size()) + q.cwiseAbs2()); };
  auto g2 = [&](const Vec& q, const Vec& v) -> Vec {
    return f2(q) + (v.array().square() * q.array() / (1 + q.array().square()).square()).matrix();
  };
  const auto g = SpectralGaussian<double>::power_law(3, 1.0, 2.0);
  const auto cgrad = preconditioned_gradient(quartic_phi<double>(3), g);

  std::vector<std::pair<std::string, PhaseMap<double>>> maps{
      {"leapfrog", [&](const Point& z) { return leapfrog(5, 0.1, 0.2, odd, f2, z); }},
      {"stormer_verlet", [&](const Point& z) { return stormer_verlet(5, 0.2, g1, g2, z); }},
      {"palindrome", palindromic_compose<double>({{kick_flow<double>(f2), 0.1}, {drift_flow<double>(odd), 0.1},
                                                  {rotation_flow<double>(), 0.2}}, 3)},
      {"strang_hilbert", [&](const Point& z) { return strang_hilbert(4, 0.2, 0.5, cgrad, z).back(); }},
  };
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, m] : maps) {
    const auto r = check_reversibility<double>(m, momentum_flip<double>, pts, 1e-8);
    if (r.max_residual >= worst) {
      worst = r.max_residual;
      worst_name = name;
    }
  }
  VectorField<double> shifted = [](const Vec& v) -> Vec { return (v.array() + 0.5).matrix(); };
  const auto bad = check_reversibility<double>(
      [&](const Point& z) { return leapfrog(5, 0.1, 0.2, shifted, f2, z); }, momentum_flip<double>, pts, 1e-8);
  const bool ok = worst <= 1e-8 && bad.max_residual > 1e-3;
  return {ok, "max residual " + fmt(worst) + " (" + worst_name + ") over 4 integrators, limit 1e-8; non-odd f1 residual " +
                  fmt(bad.max_residual) + ", must exceed 1e-3"};
}

Outcome hastings_form() {
  double worst = 0.0;
  std::string where;
  auto note = [&](double err, const std::string& name) {
    if (!(err <= worst)) {
      worst = err;
      where = name;
    }
  };
  Rng rng(6);
  {
    const auto u = checks::smooth_target(3);
    auto k = mala(u, 0.5);
    for (int i = 0; i < 100; ++i) {
      const Vec q = standard_normal<double>(3, rng), v = standard_normal<double>(3, rng);
      const Vec qt = mala_proposal(u, 0.5, q, v);
      note(std::abs(accept_prob(mala_log_hastings(u, 0.5, q, qt)) - accept_prob(k.involution().log_rn({q, v}))), "mala");
    }
  }
  const auto g = SpectralGaussian<double>::power_law(6, 1.0, 2.0);
  const auto t = make_hilbert_target(quartic_phi<double>(6), g);
  {
    auto k = pcn_from_delta(t, 0.5);
    for (int i = 0; i < 100; ++i) {
      const Vec q = sample(g, rng), v = sample(g, rng);
      const Vec qt = langevin_proposal(zero_field(), 0.5, q, v);
      note(std::abs(accept_prob(t.phi(q) - t.phi(qt)) - accept_prob(k.involution().log_rn({q, v}))), "pcn");
    }
  }
  {
    auto k = inf_mala(t, 0.5);
    for (int i = 0; i < 100; ++i) {
      const Vec q = sample(g, rng), v = sample(g, rng);
      const Vec qt = langevin_proposal(t.surrogate_f, 0.5, q, v);
      note(std::abs(accept_prob(langevin_log_ratio(t, t.surrogate_f, 0.5, q, qt)) -
                    accept_prob(k.involution().log_rn({q, v}))),
           "inf_mala");
    }
  }
  return {worst <= 1e-10, "max |alpha(q, F(q,v)) - alpha^(q,v)| = " + fmt(worst) + " (" + where +
                              "), limit 1e-10; mala, pcn, inf_mala at 100 points"};
}

Outcome reductions() {
  double worst = 0.0;
  std::string where;
  auto compare = [&](const InvolutiveKernel<double>& a, const InvolutiveKernel<double>& b,
                     const std::function<Point(Rng&)>& draw, const std::string& name) {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
      const Point z = draw(rng);
      const double err = std::abs(accept_prob(a.involution().log_rn(z)) - accept_prob(b.involution().log_rn(z)));
      if (!(err <= worst)) {
        worst = err;
        where = name;
      }
    }
  };
  const auto u = checks::smooth_target(4);
  auto fd_draw = [](Rng& rng) { return Point{standard_normal<double>(4, rng), standard_normal<double>(4, rng)}; };
  LeapfrogScheme<double> drift_only{0.0, 1.0, identity_field(), zero_field()};
  compare(surrogate_hmc(u, gaussian_momentum<double>(4), SurrogateScheme<double>(drift_only), 1),
          rwmc(u, gaussian_jump<double>(4, 1.0)), fd_draw, "surrogate_hmc(no kick) vs rwmc");
  compare(hmc(u, HmcConfig<double>{0.4, 1, {}}), mala(u, 0.4), fd_draw, "hmc(n=1) vs mala");

  const auto g = SpectralGaussian<double>::power_law(6, 1.0, 2.0);
  const auto t = make_hilbert_target(quartic_phi<double>(6), g);
  auto h_draw = [&](Rng& rng) { return Point{sample(g, rng), sample(g, rng)}; };
  const double delta = 0.5;
  compare(inf_hmc(t, AuxLaw<double>::reference(), std::sqrt(delta) / 2, std::acos(rho_from_delta(delta)), 1),
          inf_mala(t, delta), h_draw, "inf_hmc(n=1) vs inf_mala");
  compare(gen_langevin(t, zero_field(), delta), pcn_from_delta(t, delta), h_draw, "gen_langevin(f=0) vs pcn");
  return {worst <= 1e-10, "max alpha difference " + fmt(worst) + " (" + where + "), limit 1e-10; 4 reductions at 100 points"};
}

int batches_for(Index n) { return std::max(10, static_cast<int>(std::sqrt(static_cast<double>(n)))); }

Outcome phi_zero_exactness() {
  const Index d = 10;
  const auto g = SpectralGaussian<double>::power_law(d, 1.0, 2.0);
  const auto t = make_hilbert_target(zero_phi<double>(d), g, zero_field());
  std::vector<Named> kernels{{"pcn", pcn_from_delta(t, 0.5), {}},
                             {"inf_hmc", inf_hmc(t, AuxLaw<double>::reference(), 0.25, 0.5, 3), {}}};
  double min_alpha = 1.0, worst_z = 0.0;
  bool all_accepted = true;
  for (const auto& k : kernels) {
    Rng rng(8);
    const auto chain = run_chain(k.kernel, Vec(Vec::Zero(d)), 110000, rng);
    for (const auto& s : chain.steps) {
      min_alpha = std::min(min_alpha, s.alpha);
      all_accepted = all_accepted && s.accepted;
    }
    const Mat kept = chain.states.bottomRows(100000);
    const auto m = moment_check(kept, Vec::Zero(d), g.eigenvalues(), batches_for(kept.rows()));
    worst_z = std::max(worst_z, m.var_z.cwiseAbs().maxCoeff());
  }
  const bool ok = all_accepted && min_alpha >= 1 - 1e-12 && worst_z <= 3.0;
  return {ok, "min alpha " + fmt(min_alpha) + (all_accepted ? ", all accepted" : ", some rejected") +
                  "; max |variance z| " + fmt(worst_z) + " over 10 modes x {pcn, inf_hmc(f=0)}, limit 3"};
}

struct StatResult {
  double worst_z = 0.0;
  double min_p = 1.0;
  std::string worst_name;
};

void statistical_run(const Named& k, const Vec& var, StatResult& out) {
  Rng rng(9);
  const auto chain = run_chain(k.kernel, Vec(Vec::Zero(var.size())), 210000, rng);
  const Mat kept = chain.states.bottomRows(200000);
  const auto m = moment_check(kept, Vec::Zero(var.size()), var, batches_for(kept.rows()));
  const double z = m.var_z.cwiseAbs().maxCoeff();
  const Vec first = kept.col(0);
  const Vec sq = kept.rowwise().squaredNorm();
  Rng trng(10);
  const double p = std::min(detailed_balance_test(std::span<const double>(first.data(), first.size()), trng),
                            detailed_balance_test(std::span<const double>(sq.data(), sq.size()), trng));
  std::printf("      %-24s acceptance %.3f  max|var z| %.2f  min DB p %.3f\n", k.name.c_str(),
              chain.acceptance_rate(), z, p);
  if (z >= out.worst_z) {
    out.worst_z = z;
    out.worst_name = k.name;
  }
  out.min_p = std::min(out.min_p, p);
}

Vec target_variances() { return (Vec(2) << 1.0, 0.25).finished(); }

Outcome statistical_correctness() {
  const Vec var = target_variances();
  const auto u = checks::gaussian_target(var);
  std::vector<Named> kernels;
  kernels.push_back({"rwmc", rwmc(u, gaussian_jump<double>(2, 1.2)), {}});
  kernels.push_back({"mala", mala(u, 0.6), {}});
  kernels.push_back({"hmc", hmc(u, HmcConfig<double>{0.2, 8, {}}), {}});
  kernels.push_back({"relativistic_hmc", relativistic_hmc(u, 1.0, 1.0, HmcConfig<double>{0.2, 8, {}}), {}});
  kernels.push_back({"rmhmc", rmhmc(u, one_plus_q2_metric<double>(), 0.2, 6), {}});
  StormerVerletScheme<double> sv{0.2, [](const Vec&, const Vec& v) -> Vec { return v; },
                                 [g = u.grad](const Vec& q, const Vec&) -> Vec { return -g(q); }};
  kernels.push_back({"surrogate_hmc/stormer_verlet",
                     surrogate_hmc(u, gaussian_momentum<double>(2), SurrogateScheme<double>(sv), 8), {}});
  StatResult r;
  for (const auto& k : kernels) statistical_run(k, var, r);
  const bool ok = r.worst_z <= 3.0 && r.min_p > 0.01;
  return {ok, "max |variance z| " + fmt(r.worst_z) + " (" + r.worst_name + "), limit 3; min detailed-balance p " +
                  fmt(r.min_p) + ", must exceed 0.01; 6 samplers, 2e5 steps"};
}

Outcome surrogate_bias() {
  const Vec var = target_variances();
  const auto u = checks::gaussian_target(var);
  LeapfrogScheme<double> lf{0.1, 0.2, identity_field(), scaled_neg_grad(u, 1.5)};
  Named k{"surrogate_hmc (1.5 U)", surrogate_hmc(u, gaussian_momentum<double>(2), SurrogateScheme<double>(lf), 8), {}};
  StatResult r;
  statistical_run(k, var, r);
  return {r.worst_z <= 3.0 && r.min_p > 0.01, "max |variance z| " + fmt(r.worst_z) + ", limit 3; detailed-balance p " +
                                                  fmt(r.min_p) + "; surrogate force from 1.5 U, 2e5 steps"};
}

Outcome refinement_probe() {
  Rng rng(11);
  auto make = [](Index d) {
    return make_hilbert_target(quartic_phi<double>(d), SpectralGaussian<double>::power_law(d, 1.0, 2.0));
  };
  const auto rows = leapfrog_refinement_probe<double>(make, 0.25, 0.5, 5, {8, 16, 32, 64}, 100, rng);
  bool monotone = true;
  std::string naive, strang;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) monotone = monotone && rows[i].naive_statistic > rows[i - 1].naive_statistic;
    naive += (i ? ", " : "") + fmt(rows[i].naive_statistic);
    strang += (i ? ", " : "") + fmt(rows[i].abs_log_rn);
  }
  const double ratio = rows.back().abs_log_rn / rows.front().abs_log_rn;
  return {monotone && ratio < 2.0, "naive medians d=8..64: " + naive + (monotone ? " (increasing)" : " (NOT increasing)") +
                                       "; Strang |log_rn| medians: " + strang + ", ratio " + fmt(ratio) + ", limit 2"};
}

Outcome degenerate_inputs() {
  // Phi = +inf beyond a wall, NaN gradient beyond it too.
  auto walled = [](Index d) {
    return TargetPotential<double>{
        [](const Vec& q) { return q[0] > 0.5 ? kInf<double> : 0.5 * q.squaredNorm() + 0.1 * q.array().pow(4).sum(); },
        [](const Vec& q) -> Vec {
          return q[0] > 0.5 ? Vec::Constant(q.size(), std::nan("")) : Vec(q + 0.4 * q.array().cube().matrix());
        },
        d};
  };
  const Index d = 3;
  std::vector<Named> kernels = fd_kernels(walled(d));
  for (auto& k : hilbert_kernels(make_hilbert_target(walled(d), SpectralGaussian<double>::power_law(d, 1.0, 2.0))))
    kernels.push_back(std::move(k));
  // Steps too large for the implicit solver to converge.
  kernels.push_back({"rmhmc (large step)", rmhmc(checks::smooth_target(d), one_plus_q2_metric<double>(), 3.0, 2), {}});

  bool ok = true;
  std::string problems;
  int rejected_total = 0;
  for (const auto& k : kernels) {
    try {
      Rng a(12), b(12);
      const auto c1 = run_chain(k.kernel, Vec(Vec::Zero(d)), 2000, a);
      const auto c2 = run_chain(k.kernel, Vec(Vec::Zero(d)), 2000, b);
      const bool valid = c1.states.allFinite() && (k.name.find("large") != std::string::npos ||
                                                   c1.states.col(0).maxCoeff() <= 0.5);
      const bool same = c1.states == c2.states;
      for (const auto& s : c1.steps) rejected_total += s.alpha == 0.0 ? 1 : 0;
      if (!valid || !same) {
        ok = false;
        problems += " " + k.name + (valid ? "" : " invalid") + (same ? "" : " non-deterministic");
      }
    } catch (const std::exception& e) {
      ok = false;
      problems += " " + k.name + " threw: " + e.what();
    }
  }
  // The large-step RMHMC kernel must actually hit non-convergence.
  const auto big = rmhmc(checks::smooth_target(1), one_plus_q2_metric<double>(), 3.0, 2);
  const bool nonconv_rejected = big.involution().log_rn({Vec::Constant(1, 2.0), Vec::Constant(1, 30.0)}) == -kInf<double>;
  ok = ok && nonconv_rejected && rejected_total > 0;
  return {ok, std::to_string(kernels.size()) + " kernels ran 2000 steps twice without error, identical and finite; " +
                  std::to_string(rejected_total) + " zero-alpha proposals" +
                  (nonconv_rejected ? "; non-convergence rejected" : "; non-convergence NOT rejected") + problems};
}

struct Criterion {
  const char* id;
  const char* title;
  double budget_s;  // 0 = none stated
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"C1", "involution", 30, [] { return involution_and_skew(false); }},
      {"C2", "log-RN skew-symmetry", 0, [] { return involution_and_skew(true); }},
      {"C3", "oracle equivalence", 60, oracle_equivalence},
      {"C4", "volume preservation", 0, volume_preservation},
      {"C5", "reversibility", 0, reversibility},
      {"C6", "Hastings-form equivalence", 0, hastings_form},
      {"C7", "reductions", 0, reductions},
      {"C8", "Phi = 0 exactness", 60, phi_zero_exactness},
      {"C9", "statistical correctness", 120, statistical_correctness},
      {"C10", "surrogate-bias correction", 0, surrogate_bias},
      {"C11", "refinement probe", 0, refinement_probe},
      {"C12", "degenerate-input hardening", 0, degenerate_inputs},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt(secs) + " s";
    if (c.budget_s > 0) {
      timing += " of " + fmt(c.budget_s) + " s";
      if (secs > c.budget_s) {
        o.passed = false;
        timing += " OVER BUDGET";
      }
    }
    std::printf("%s %-4s %-28s %s [%s]\n", o.passed ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
    failures += o.passed ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
