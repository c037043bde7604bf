#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rollout/sim_env.hpp"
#include "rollout/tree.hpp"
#include "rollout/uucb.hpp"

namespace rollout {

/// Immutable point-in-time copy of the per-node scoring statistics of one tree.
class QTableSnapshot {
 public:
  static QTableSnapshot take(const RolloutTree& tree);

  std::uint64_t version() const noexcept { return version_; }
  std::uint64_t tree_instance() const noexcept { return instance_; }
  std::size_t size() const noexcept { return stats_.size(); }
  const ScoreInputs& inputs(NodeId id) const;
  ScoreScale scale() const noexcept { return scale_; }

  /// Current tree version minus the snapshot version. Foreign trees are a domain error.
  std::uint64_t staleness(const RolloutTree& tree) const;

  UucbBreakdown score(NodeId id, const UucbCoefficients& coeffs, const DepthStats& stats) const;

 private:
  std::vector<ScoreInputs> stats_;
  std::uint64_t version_ = 0;
  std::uint64_t instance_ = 0;
  ScoreScale scale_{};
};

inline QTableSnapshot take_snapshot(const RolloutTree& tree) { return QTableSnapshot::take(tree); }

struct ExpansionProposal {
  NodeId node{0};
  std::uint64_t snapshot_version = 0;
  int stale_rank = 0;
  UucbBreakdown stale_score;
  std::vector<Trajectory> trajectories;  ///< buffered, not yet integrated
};

/// Everything a worker needs to turn a snapshot into a proposal.
struct ProposalRequest {
  std::span<const NodeId> frontier;
  UucbCoefficients coeffs;
  const DepthStats* stats = nullptr;
  const SimPolicy* policy = nullptr;
  int rank = 0;                ///< which snapshot rank this worker proposes
  int per_node = 2;            ///< rollouts drawn for the proposed node
  std::uint64_t seed = 0;      ///< build seed (streams are keyed by seed, round, node, draw)
  int round = 1;
  int staleness_bound = 0;
  int rollout_latency_us = 0;  ///< simulated generation latency per rollout
};

/// Scores the frontier on the snapshot and buffers rollouts for the node at
/// `rank`. Returns nullopt (refused) if the snapshot is staler than the bound,
/// or if the frontier has no node at that rank.
std::optional<ExpansionProposal> propose(const QTableSnapshot& snap, const RolloutTree& tree,
                                         const ProposalRequest& req);

struct ReconcileOutcome {
  std::vector<ExpansionProposal> accepted;
  std::vector<ExpansionProposal> rolled_back;
  std::vector<NodeId> fresh_top;  ///< fresh top-K computed once before any integration
  double acceptance_rate = 1.0;
  std::uint64_t fresh_version = 0;
  int integrated = 0;             ///< rollouts integrated (budget-limited)
  int wasted = 0;                 ///< buffered rollouts discarded
};

/// Accepts proposals whose node is in the fresh top `accept_rank`, integrating
/// their rollouts in ascending NodeId order until `budget` leaves exist.
ReconcileOutcome reconcile(std::vector<ExpansionProposal> proposals, RolloutTree& tree,
                           const UucbCoefficients& coeffs, const DepthStats& stats, int accept_rank, int budget);

struct SpeculativeRoundConfig {
  int workers = 1;
  int staleness_bound = 0;
  int n_select = 1;     ///< proposals per round
  int accept_rank = 1;  ///< fresh top-K window
  int per_node = 2;
  int budget = 16;
  std::uint64_t seed = 0;
  int round = 1;
  UucbCoefficients coeffs;
  int rollout_latency_us = 0;
  /// Optional coordinator hooks that apply extra backups to the tree, after the
  /// snapshots are taken and before reconciliation, to model concurrent writers.
  std::function<void(RolloutTree&)> drift_after_snapshot;
  std::function<void(RolloutTree&)> drift_before_reconcile;
};

struct RoundMetrics {
  int proposals = 0;
  int refused = 0;   ///< proposals refused for staleness and re-done on a fresh snapshot
  int accepted = 0;
  int rolled_back = 0;
  double acceptance_rate = 1.0;
  double q_drift = 0.0;  ///< mean |Q fresh - Q snapshot| over the round frontier
  double seconds = 0.0;
  int wasted = 0;
};

struct SpeculativeRoundResult {
  ReconcileOutcome outcome;
  RoundMetrics metrics;
  std::vector<NodeId> frontier;
};

/// One expansion round: snapshots, parallel proposals, serialized reconciliation.
SpeculativeRoundResult run_speculative_round(RolloutTree& tree, const SimPolicy& policy, const DepthStats& stats,
                                             const SpeculativeRoundConfig& cfg);

}  // namespace rollout
