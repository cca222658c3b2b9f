#include "invmh/diagnostics.hpp"

#include "invmh/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace invmh {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

}  // namespace

std::vector<double> autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const double mu = mean_of(x);
  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  std::vector<double> padded(len, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mu;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& c : spec) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> acov;
  fft.inv(acov, spec);

  std::vector<double> rho(n, 0.0);
  if (!(acov[0] > 0.0)) {
    rho[0] = 1.0;
    return rho;
  }
  for (std::size_t k = 0; k < n; ++k) rho[k] = acov[k] / acov[0];
  return rho;
}

EssResult ess(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 10) throw ConfigError("ess: need at least 10 samples");
  if (is_constant(x)) return {static_cast<double>(n), true};
  const std::vector<double> rho = autocorrelation(x);

  // Initial positive, monotone sequence of paired sums.
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double gamma = rho[2 * m] + rho[2 * m + 1];
    if (!(gamma > 0.0)) break;
    gamma = std::min(gamma, prev);
    prev = gamma;
    tau += 2.0 * gamma;
  }
  const double nn = static_cast<double>(n);
  const double e = tau > 0.0 ? nn / tau : nn;
  return {std::min(e, nn), false};
}

double detailed_balance_test(std::span<const double> x, std::span<const double> y, Rng& rng,
                             const DetailedBalanceOptions& opts) {
  if (x.size() != y.size()) throw ConfigError("detailed_balance_test: x and y differ in length");
  if (opts.permutations < 1) throw ConfigError("detailed_balance_test: need permutations");
  const std::size_t total = x.size();
  const std::size_t stride =
      opts.max_pairs == 0 ? 1 : std::max<std::size_t>(1, (total + opts.max_pairs - 1) / opts.max_pairs);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < total; i += stride) {
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  const std::size_t n = xs.size();
  if (n < 100)
    throw ConfigError("detailed_balance_test: need at least 100 pairs, have " + std::to_string(n));
  if (is_constant(xs) && is_constant(ys) && xs.front() == ys.front()) return 1.0;

  // Flipping pair i swaps a_i = (x_i, y_i) with its reflection b_i; the
  // energy statistic becomes s' W s with s_i = +-1 and
  // W_ij = |a_i - b_j| - |a_i - a_j|.
  Eigen::MatrixXd w(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double cross = std::hypot(xs[i] - ys[j], ys[i] - xs[j]);
      const double same = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
      w(static_cast<Index>(i), static_cast<Index>(j)) = cross - same;
    }
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Index>(n));
  const double observed = ones.dot(w * ones);
  const double slack = 1e-12 * (1.0 + std::abs(observed));

  Eigen::VectorXd s(static_cast<Index>(n));
  int at_least = 0;
  for (int p = 0; p < opts.permutations; ++p) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) bits = rng();
      s[static_cast<Index>(i)] = (bits & 1u) ? 1.0 : -1.0;
      bits >>= 1;
    }
    if (s.dot(w * s) >= observed - slack) ++at_least;
  }
  return (1.0 + at_least) / (1.0 + opts.permutations);
}

double detailed_balance_test(std::span<const double> g, Rng& rng, const DetailedBalanceOptions& opts) {
  if (g.size() < 2) throw ConfigError("detailed_balance_test: chain too short");
  return detailed_balance_test(g.first(g.size() - 1), g.subspan(1), rng, opts);
}

double batch_means_se(std::span<const double> x, int batch_count) {
  if (batch_count < 2) throw ConfigError("batch_means_se: need at least two batches");
  const std::size_t b = static_cast<std::size_t>(batch_count);
  if (x.size() < b) throw ConfigError("batch_means_se: chain shorter than batch count");
  const std::size_t m = x.size() / b;
  const std::size_t offset = x.size() - m * b;
  std::vector<double> means(b);
  for (std::size_t k = 0; k < b; ++k) means[k] = mean_of(x.subspan(offset + k * m, m));
  const double mu = mean_of(means);
  double ss = 0.0;
  for (double v : means) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
}

namespace {

double z_score(double estimate, double truth, double se) {
  if (se > 0.0) return (estimate - truth) / se;
  if (estimate == truth) return 0.0;
  return estimate > truth ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
}

std::vector<double> column(const Eigen::MatrixXd& a, Index j) {
  std::vector<double> out(static_cast<std::size_t>(a.rows()));
  Eigen::Map<Eigen::VectorXd>(out.data(), a.rows()) = a.col(j);
  return out;
}

}  // namespace

MomentCheckResult moment_check(const Eigen::MatrixXd& states, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, int batch_count) {
  if (batch_count < 10) throw ConfigError("moment_check: batch_count must be at least 10");
  const Index d = states.cols();
  if (states.rows() < batch_count) throw ConfigError("moment_check: chain shorter than batch count");
  if (mean.size() != d) throw ConfigError("moment_check: mean has the wrong dimension");
  Eigen::VectorXd var_truth;
  if (cov.cols() == 1 && cov.rows() == d) var_truth = cov.col(0);
  else if (cov.rows() == d && cov.cols() == d) var_truth = cov.diagonal();
  else throw ConfigError("moment_check: covariance has the wrong shape");

  MomentCheckResult r;
  r.mean.resize(d), r.mean_se.resize(d), r.mean_z.resize(d);
  r.var.resize(d), r.var_se.resize(d), r.var_z.resize(d);
  for (Index j = 0; j < d; ++j) {
    std::vector<double> x = column(states, j);
    r.mean[j] = mean_of(x);
    r.mean_se[j] = batch_means_se(x, batch_count);
    r.mean_z[j] = z_score(r.mean[j], mean[j], r.mean_se[j]);
    for (double& v : x) v = (v - mean[j]) * (v - mean[j]);
    r.var[j] = mean_of(x);
    r.var_se[j] = batch_means_se(x, batch_count);
    r.var_z[j] = z_score(r.var[j], var_truth[j], r.var_se[j]);
  }
  return r;
}

ChainSummary summarize(const Eigen::MatrixXd& states, double acceptance_rate, Rng& rng,
                       int batch_count, const DetailedBalanceOptions& db) {
  ChainSummary s;
  s.acceptance_rate = acceptance_rate;
  const Index n = states.rows(), d = states.cols();
  s.n_samples = static_cast<std::size_t>(n);
  s.mean = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
  s.mean_se = s.mean;
  s.variance = s.mean;
  s.variance_se = s.mean;
  if (n == 0) return s;

  const bool batches_ok = n >= 2 * batch_count;
  std::vector<double> sqnorm(static_cast<std::size_t>(n));
  Eigen::Map<Eigen::VectorXd>(sqnorm.data(), n) = states.rowwise().squaredNorm();
  for (Index j = 0; j < d; ++j) {
    std::vector<double> x = column(states, j);
    s.mean[j] = mean_of(x);
    if (batches_ok) s.mean_se[j] = batch_means_se(x, batch_count);
    for (double& v : x) v = (v - s.mean[j]) * (v - s.mean[j]);
    s.variance[j] = n > 1 ? mean_of(x) * static_cast<double>(n) / static_cast<double>(n - 1) : 0.0;
    if (batches_ok) s.variance_se[j] = batch_means_se(x, batch_count);
  }
  if (n >= 10) {
    for (Index j = 0; j < d; ++j) {
      const EssResult e = ess(column(states, j));
      s.ess.push_back(e.ess);
      s.ess_degenerate = s.ess_degenerate || e.degenerate;
    }
    const EssResult e = ess(sqnorm);
    s.ess.push_back(e.ess);
    s.ess_degenerate = s.ess_degenerate || e.degenerate;
  }
  if (n >= 101 && d > 0) {
    try {
      s.db_pvalue_first = detailed_balance_test(column(states, 0), rng, db);
      s.db_pvalue_sqnorm = detailed_balance_test(sqnorm, rng, db);
    } catch (const ConfigError&) {
      // Too few pairs after thinning; leave the p-values absent.
    }
  }
  return s;
}

}  // namespace invmh
