#include "rollout/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rollout/errors.hpp"
#include "rollout/rng.hpp"

namespace rollout::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean of empty sequence");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_variance(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size());
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw DomainError("pearson: need two equal series of length >= 2");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double r = pearson(rx, ry);
  if (std::isnan(r)) return std::nullopt;
  return r;
}

std::optional<PermutationResult> spearman_permutation_test(std::span<const double> xs,
                                                           std::span<const double> ys, int permutations,
                                                           std::uint64_t seed, int alternative) {
  auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double observed = pearson(rx, ry);
  if (std::isnan(observed)) return std::nullopt;

  CounterRng rng(seed, 0x5045524DULL, 0, 0);
  int extreme = 0;
  for (int p = 0; p < permutations; ++p) {
    for (std::size_t i = rx.size() - 1; i > 0; --i) std::swap(rx[i], rx[rng.below(i + 1)]);
    const double r = pearson(rx, ry);
    const bool hit = alternative > 0   ? r >= observed
                     : alternative < 0 ? r <= observed
                                       : std::abs(r) >= std::abs(observed);
    if (hit) ++extreme;
  }
  return PermutationResult{observed, (extreme + 1.0) / (permutations + 1.0), permutations};
}

Interval bootstrap_mean_ci(std::span<const double> xs, int resamples, double level, std::uint64_t seed) {
  const double est = mean(xs);
  CounterRng rng(seed, 0x424F4F54ULL, 0, 0);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += xs[rng.below(xs.size())];
    m = s / static_cast<double>(xs.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - level);
  auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::clamp(q * (resamples - 1), 0.0, resamples - 1.0));
    return means[k];
  };
  return {est, at(tail), at(1.0 - tail)};
}

Interval normal_mean_ci(std::span<const double> xs, double z) {
  const double m = mean(xs);
  const double var = population_variance(xs) * xs.size() / std::max<double>(1.0, xs.size() - 1.0);
  const double half = z * std::sqrt(var / xs.size());
  return {m, m - half, m + half};
}

namespace {

void check_labels(std::span<const double> scores, std::span<const int> labels, long& pos, long& neg) {
  if (scores.size() != labels.size()) throw DomainError("roc: scores and labels differ in length");
  pos = std::count(labels.begin(), labels.end(), 1);
  neg = static_cast<long>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw DomainError("roc: need both classes");
}

}  // namespace

double roc_auc_trapezoid(std::span<const double> scores, std::span<const int> labels) {
  long pos = 0, neg = 0;
  check_labels(scores, labels, pos, neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double tp = 0.0, fp = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Sweep all tied scores as one threshold step.
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    const double tpr = tp / pos;
    const double fpr = fp / neg;
    area += 0.5 * (fpr - prev_fpr) * (tpr + prev_tpr);
    prev_tpr = tpr;
    prev_fpr = fpr;
    i = j;
  }
  return area;
}

double roc_auc_mann_whitney(std::span<const double> scores, std::span<const int> labels) {
  long pos = 0, neg = 0;
  check_labels(scores, labels, pos, neg);
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (labels[i] == 1) rank_sum += ranks[i];
  const double u = rank_sum - 0.5 * static_cast<double>(pos) * (pos + 1);
  return u / (static_cast<double>(pos) * neg);
}

double ols_slope(std::span<const double> xs, std::span<const double> ys) {
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) return 0.0;
  return sxy / sxx;
}

}  // namespace rollout::stats
