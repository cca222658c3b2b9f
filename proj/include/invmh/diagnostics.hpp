#pragma once

// Chain diagnostics over finished double-precision chains.

#include "invmh/types.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace invmh {

struct EssResult {
  double ess = 0.0;
  /// Set for zero-variance input; ess is then the chain length.
  bool degenerate = false;
};

/// Normalized autocorrelations rho_0..rho_{N-1} (rho_0 = 1), by FFT.
std::vector<double> autocorrelation(std::span<const double> x);

/// N / tau with tau from Geyer's initial positive sequence, capped at N.
/// Requires N >= 10.
EssResult ess(std::span<const double> x);

struct DetailedBalanceOptions {
  int permutations = 999;
  /// Transitions are thinned by a uniform stride down to at most this many.
  std::size_t max_pairs = 1000;
};

/// Permutation test of (x_k, y_k) =d (y_k, x_k) with the energy distance
/// between the pair cloud and its reflection. Each permutation flips the
/// orientation of every pair independently. Needs at least 100 pairs after
/// thinning.
double detailed_balance_test(std::span<const double> x, std::span<const double> y, Rng& rng,
                             const DetailedBalanceOptions& opts = {});

/// The same test on consecutive transitions (g_k, g_{k+1}) of a scalar chain.
double detailed_balance_test(std::span<const double> g, Rng& rng,
                             const DetailedBalanceOptions& opts = {});

struct MomentCheckResult {
  Eigen::VectorXd mean, mean_se, mean_z;
  /// Variance estimates about the true mean, their batch-means SEs and z.
  Eigen::VectorXd var, var_se, var_z;
};

/// Batch-means z-scores for per-coordinate means and variances against an
/// analytic truth. states is N x d; cov may be d x d (diagonal used) or d x 1.
MomentCheckResult moment_check(const Eigen::MatrixXd& states, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov, int batch_count = 20);

/// Batch-means standard error of the mean of x.
double batch_means_se(std::span<const double> x, int batch_count = 20);

struct ChainSummary {
  double acceptance_rate = 0.0;
  std::size_t n_samples = 0;
  Eigen::VectorXd mean, mean_se, variance, variance_se;
  /// One per coordinate, then one for the squared norm.
  std::vector<double> ess;
  bool ess_degenerate = false;
  std::optional<double> db_pvalue_first;
  std::optional<double> db_pvalue_sqnorm;
};

/// Summary of an N x d chain. Detailed-balance p-values are absent for chains
/// too short to test.
ChainSummary summarize(const Eigen::MatrixXd& states, double acceptance_rate, Rng& rng,
                       int batch_count = 20, const DetailedBalanceOptions& db = {});

}  // namespace invmh
