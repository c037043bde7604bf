#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rollout::stats {

double mean(std::span<const double> xs);

/// Two-pass population variance. Empty input is a domain error.
double population_variance(std::span<const double> xs);

/// Average ranks (1-based), ties receive the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

double pearson(std::span<const double> xs, std::span<const double> ys);

/// Tie-corrected Spearman rank correlation (Pearson on average ranks).
/// Returns nullopt when either series is constant.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct PermutationResult {
  double statistic = 0.0;
  double p_value = 1.0;  ///< (count + 1) / (permutations + 1)
  int permutations = 0;
};

/// Permutation test on Spearman rho. `alternative` > 0 tests rho > 0,
/// < 0 tests rho < 0, 0 is two-sided on |rho|.
std::optional<PermutationResult> spearman_permutation_test(std::span<const double> xs,
                                                           std::span<const double> ys, int permutations,
                                                           std::uint64_t seed, int alternative);

struct Interval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
};

/// Percentile bootstrap CI for the mean.
Interval bootstrap_mean_ci(std::span<const double> xs, int resamples, double level, std::uint64_t seed);

/// Normal-approximation CI for the mean of paired differences.
Interval normal_mean_ci(std::span<const double> xs, double z = 1.959963984540054);

/// ROC-AUC by trapezoidal integration of the empirical ROC curve.
double roc_auc_trapezoid(std::span<const double> scores, std::span<const int> labels);

/// ROC-AUC as the normalized Mann-Whitney U statistic (ties count one half).
double roc_auc_mann_whitney(std::span<const double> scores, std::span<const int> labels);

/// Ordinary least-squares slope of y on x.
double ols_slope(std::span<const double> xs, std::span<const double> ys);

}  // namespace rollout::stats
