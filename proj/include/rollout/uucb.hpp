#pragma once

#include <span>
#include <vector>

#include "rollout/tree.hpp"

namespace rollout {

struct UucbCoefficients {
  double c = 1.0;
  double lambda_h = 0.05;
  double lambda_c = 0.35;
  double lambda_d = 0.05;
};

/// Per-depth action-entropy mean and population std.
struct DepthStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<int> count;

  /// z-score of `entropy` against its depth stratum; 0 for unseen or degenerate strata.
  double normalized(double entropy, int depth) const;
};

DepthStats fit_depth_stats(std::span<const Trajectory> trajectories);

/// Stats over every root->leaf path currently in the tree.
DepthStats fit_depth_stats(const RolloutTree& tree);

/// The five additive terms of the score. `cost_term` and `depth_term` hold
/// the (non-negative) penalty magnitudes; they enter the total with a minus sign.
struct UucbBreakdown {
  double q_term = 0.0;
  double explore_term = 0.0;
  double entropy_term = 0.0;
  double cost_term = 0.0;
  double depth_term = 0.0;
  double total = 0.0;

  static UucbBreakdown from_terms(double q, double explore, double entropy, double cost, double depth) {
    return {q, explore, entropy, cost, depth, q + explore + entropy - cost - depth};
  }
};

/// The node statistics the score reads. Snapshots and live trees both produce these.
struct ScoreInputs {
  double q_mean = 0.0;
  int visits = 0;
  int parent_visits = 0;
  double entropy = 0.0;
  int depth = 0;
  int path_cost = 0;
};

struct ScoreScale {
  int tool_cap = 5;
  int depth_cap = 6;
};

UucbBreakdown uucb_score(const ScoreInputs& in, const UucbCoefficients& coeffs, const DepthStats& stats,
                         ScoreScale scale);

/// Scores a tree node; the root uses its own visit count in place of the parent's.
UucbBreakdown uucb_score(const RolloutTree& tree, NodeId id, const UucbCoefficients& coeffs,
                         const DepthStats& stats);

ScoreInputs score_inputs(const RolloutTree& tree, NodeId id);

struct ScoredNode {
  NodeId node{0};
  UucbBreakdown score;
};

std::vector<ScoredNode> score_frontier(const RolloutTree& tree, std::span<const NodeId> frontier,
                                       const UucbCoefficients& coeffs, const DepthStats& stats);

/// The n highest totals, ties broken by lower NodeId.
std::vector<NodeId> select_top_n(std::span<const ScoredNode> scored, int n);

}  // namespace rollout
