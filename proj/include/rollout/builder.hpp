#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rollout/allocator.hpp"
#include "rollout/sim_env.hpp"
#include "rollout/speculative.hpp"
#include "rollout/tree.hpp"
#include "rollout/uucb.hpp"

namespace rollout {

struct SpeculativeSettings {
  bool enabled = false;
  int staleness_bound = 0;
  int workers = 1;
  int accept_rank = 0;  ///< fresh top-K window; 0 means "same as n_select"
  std::function<void(RolloutTree&)> drift_after_snapshot;
  std::function<void(RolloutTree&)> drift_before_reconcile;
};

struct BuildConfig {
  int initial = 12;  ///< rollouts from the root before any expansion
  int rounds = 2;
  int n_select = 1;  ///< nodes expanded per round
  int per_node = 2;  ///< rollouts drawn from each expanded node
  int budget = 16;   ///< total leaf budget before the rescue line
  TreeLimits limits{};
  UucbCoefficients coeffs{};
  std::uint64_t seed = 0;
  SpeculativeSettings speculative{};
  std::shared_ptr<const AllocatorModel> allocator;  ///< rescue hook; absent means never rescue
  double rescue_temperature = 1.2;
  int rollout_latency_us = 0;

  /// Throws ConfigError on nonsensical values.
  void validate() const;
};

struct RoundRecord {
  int round = 0;
  bool skipped = false;  ///< empty frontier
  std::vector<NodeId> frontier;
  std::vector<ScoredNode> scores;
  std::vector<NodeId> selected;
  int budget_after = 0;
  bool speculative = false;
  RoundMetrics metrics;
};

struct RescueRecord {
  bool evaluated = false;  ///< the tree was uniform and a model was present
  double probability = 0.0;
  bool triggered = false;
  int reward = 0;
};

struct BuildLog {
  int initial_rollouts = 0;
  std::vector<RoundRecord> rounds;
  RescueRecord rescue;

  std::string to_jsonl() const;
};

struct BuildResult {
  RolloutTree tree;
  BuildLog log;
};

BuildResult build_tree(const SimPolicy& policy, const BuildConfig& cfg);

/// One sequential expansion round: score the frontier, take the top n_select,
/// and integrate per_node rollouts for each in ascending NodeId order until
/// the budget is reached.
RoundRecord expand_round(RolloutTree& tree, const SimPolicy& policy, const DepthStats& stats, const BuildConfig& cfg,
                         int round);

/// Draws the rescue rollout iff the tree is uniform and the model says > threshold.
RescueRecord rescue_if_uniform(RolloutTree& tree, const AllocatorModel& model, const SimPolicy& policy,
                               std::uint64_t seed, double temperature = 1.2);

/// Tree with only the initial batch of rollouts (the state the first round sees).
RolloutTree initial_tree(const SimPolicy& policy, const BuildConfig& cfg);

}  // namespace rollout
