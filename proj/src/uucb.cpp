#include "rollout/uucb.hpp"

#include <algorithm>
#include <cmath>

#include "rollout/errors.hpp"

namespace rollout {

double DepthStats::normalized(double entropy, int depth) const {
  if (depth < 0 || static_cast<std::size_t>(depth) >= mean.size()) return 0.0;
  const auto d = static_cast<std::size_t>(depth);
  if (count[d] == 0 || !(stddev[d] > 0.0)) return 0.0;
  return (entropy - mean[d]) / stddev[d];
}

DepthStats fit_depth_stats(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw DomainError("depth statistics need at least one trajectory");
  std::vector<std::vector<double>> strata;
  for (const Trajectory& t : trajectories) {
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto d = static_cast<std::size_t>(t.start_depth) + i;
      if (strata.size() <= d) strata.resize(d + 1);
      strata[d].push_back(t.steps[i].entropy);
    }
  }
  DepthStats stats;
  stats.mean.assign(strata.size(), 0.0);
  stats.stddev.assign(strata.size(), 0.0);
  stats.count.assign(strata.size(), 0);
  for (std::size_t d = 0; d < strata.size(); ++d) {
    const auto& xs = strata[d];
    stats.count[d] = static_cast<int>(xs.size());
    if (xs.empty()) continue;
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
      stats.mean[d] = xs.front();  // a constant stratum has no spread, not a rounding residue
      continue;
    }
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    stats.mean[d] = m;
    stats.stddev[d] = std::sqrt(v / static_cast<double>(xs.size()));
  }
  return stats;
}

DepthStats fit_depth_stats(const RolloutTree& tree) {
  std::vector<Trajectory> trajs;
  trajs.reserve(tree.leaves().size());
  for (NodeId leaf : tree.leaves()) trajs.push_back(rooted_trajectory(tree, leaf));
  return fit_depth_stats(trajs);
}

UucbBreakdown uucb_score(const ScoreInputs& in, const UucbCoefficients& coeffs, const DepthStats& stats,
                         ScoreScale scale) {
  if (in.parent_visits < 1) throw DomainError("parent must have been visited");
  if (in.visits < 0) throw DomainError("visit count must be non-negative");
  const double explore =
      coeffs.c * std::sqrt(std::log(static_cast<double>(in.parent_visits)) / (in.visits + 1.0));
  const double h = coeffs.lambda_h * stats.normalized(in.entropy, in.depth);
  const double cost = scale.tool_cap > 0 ? coeffs.lambda_c * in.path_cost / static_cast<double>(scale.tool_cap) : 0.0;
  const double depth = scale.depth_cap > 0 ? coeffs.lambda_d * in.depth / static_cast<double>(scale.depth_cap) : 0.0;
  return UucbBreakdown::from_terms(in.q_mean, explore, h, cost, depth);
}

ScoreInputs score_inputs(const RolloutTree& tree, NodeId id) {
  const TreeNode& n = tree.node(id);
  const TreeNode& pa = n.parent ? tree.node(*n.parent) : n;
  return {n.q_mean(), n.visits, pa.visits, n.entropy, n.depth, n.path_cost};
}

UucbBreakdown uucb_score(const RolloutTree& tree, NodeId id, const UucbCoefficients& coeffs,
                         const DepthStats& stats) {
  return uucb_score(score_inputs(tree, id), coeffs, stats, {tree.limits().tool_cap, tree.limits().depth_cap});
}

std::vector<ScoredNode> score_frontier(const RolloutTree& tree, std::span<const NodeId> frontier,
                                       const UucbCoefficients& coeffs, const DepthStats& stats) {
  std::vector<ScoredNode> out;
  out.reserve(frontier.size());
  for (NodeId id : frontier) out.push_back({id, uucb_score(tree, id, coeffs, stats)});
  return out;
}

std::vector<NodeId> select_top_n(std::span<const ScoredNode> scored, int n) {
  if (n < 1) throw DomainError("must select at least one node");
  std::vector<ScoredNode> order(scored.begin(), scored.end());
  std::stable_sort(order.begin(), order.end(), [](const ScoredNode& a, const ScoredNode& b) {
    if (a.score.total != b.score.total) return a.score.total > b.score.total;
    return a.node < b.node;
  });
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < order.size() && static_cast<int>(i) < n; ++i) out.push_back(order[i].node);
  return out;
}

}  // namespace rollout
