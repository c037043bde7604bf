#include "rollout/speculative.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "rollout/errors.hpp"

namespace rollout {

QTableSnapshot QTableSnapshot::take(const RolloutTree& tree) {
  QTableSnapshot s;
  s.version_ = tree.version();
  s.instance_ = tree.instance();
  s.scale_ = {tree.limits().tool_cap, tree.limits().depth_cap};
  s.stats_.reserve(tree.size());
  for (const TreeNode& n : tree.nodes()) s.stats_.push_back(score_inputs(tree, n.id));
  return s;
}

const ScoreInputs& QTableSnapshot::inputs(NodeId id) const {
  if (index(id) >= stats_.size()) throw StructuralError("node is newer than the snapshot");
  return stats_[index(id)];
}

std::uint64_t QTableSnapshot::staleness(const RolloutTree& tree) const {
  if (tree.instance() != instance_) throw DomainError("snapshot was taken from a different tree");
  if (tree.version() < version_) throw DomainError("tree version is behind the snapshot");
  return tree.version() - version_;
}

UucbBreakdown QTableSnapshot::score(NodeId id, const UucbCoefficients& coeffs, const DepthStats& stats) const {
  return uucb_score(inputs(id), coeffs, stats, scale_);
}

std::optional<ExpansionProposal> propose(const QTableSnapshot& snap, const RolloutTree& tree,
                                         const ProposalRequest& req) {
  if (req.stats == nullptr || req.policy == nullptr) throw DomainError("proposal request is incomplete");
  if (snap.staleness(tree) > static_cast<std::uint64_t>(req.staleness_bound)) return std::nullopt;
  std::vector<ScoredNode> scored;
  scored.reserve(req.frontier.size());
  for (NodeId id : req.frontier) scored.push_back({id, snap.score(id, req.coeffs, *req.stats)});
  const auto top = select_top_n(scored, req.rank + 1);
  if (static_cast<int>(top.size()) <= req.rank) return std::nullopt;

  ExpansionProposal p;
  p.node = top[static_cast<std::size_t>(req.rank)];
  p.snapshot_version = snap.version();
  p.stale_rank = req.rank;
  p.stale_score = snap.score(p.node, req.coeffs, *req.stats);
  const StartPoint start = StartPoint::of(tree.node(p.node));
  for (int k = 0; k < req.per_node; ++k) {
    CounterRng rng = policy_stream(req.seed, *req.policy, static_cast<std::uint64_t>(req.round), index(p.node),
                                   static_cast<std::uint64_t>(k));
    p.trajectories.push_back(req.policy->sample(start, 1.0, rng));
    if (req.rollout_latency_us > 0) std::this_thread::sleep_for(std::chrono::microseconds(req.rollout_latency_us));
  }
  return p;
}

ReconcileOutcome reconcile(std::vector<ExpansionProposal> proposals, RolloutTree& tree,
                           const UucbCoefficients& coeffs, const DepthStats& stats, int accept_rank, int budget) {
  ReconcileOutcome out;
  out.fresh_version = tree.version();
  const auto frontier = expandable_frontier(tree, tree.limits().depth_cap);
  if (!frontier.empty() && accept_rank > 0)
    out.fresh_top = select_top_n(score_frontier(tree, frontier, coeffs, stats), accept_rank);

  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const ExpansionProposal& a, const ExpansionProposal& b) { return a.node < b.node; });
  std::vector<NodeId> taken;
  for (ExpansionProposal& p : proposals) {
    const bool fresh = std::find(out.fresh_top.begin(), out.fresh_top.end(), p.node) != out.fresh_top.end();
    const bool duplicate = std::find(taken.begin(), taken.end(), p.node) != taken.end();
    if (!fresh || duplicate) {
      out.wasted += static_cast<int>(p.trajectories.size());
      out.rolled_back.push_back(std::move(p));
      continue;
    }
    taken.push_back(p.node);
    for (Trajectory& t : p.trajectories) {
      if (tree.budget_used() >= budget) {
        ++out.wasted;
        continue;
      }
      tree.add_rollout(t);
      ++out.integrated;
    }
    out.accepted.push_back(std::move(p));
  }
  const std::size_t total = out.accepted.size() + out.rolled_back.size();
  out.acceptance_rate = total > 0 ? static_cast<double>(out.accepted.size()) / static_cast<double>(total) : 1.0;
  return out;
}

SpeculativeRoundResult run_speculative_round(RolloutTree& tree, const SimPolicy& policy, const DepthStats& stats,
                                             const SpeculativeRoundConfig& cfg) {
  if (cfg.workers < 1 || cfg.staleness_bound < 0 || cfg.n_select < 1)
    throw DomainError("speculative round needs workers >= 1, staleness >= 0, n >= 1");
  SpeculativeRoundResult res;
  const auto t0 = std::chrono::steady_clock::now();
  res.frontier = expandable_frontier(tree, tree.limits().depth_cap);
  if (res.frontier.empty()) return res;

  std::vector<QTableSnapshot> snaps;
  snaps.reserve(static_cast<std::size_t>(cfg.workers));
  for (int w = 0; w < cfg.workers; ++w) snaps.push_back(QTableSnapshot::take(tree));
  if (cfg.drift_after_snapshot) cfg.drift_after_snapshot(tree);

  // The tree is frozen while workers run; they only read it.
  std::vector<std::vector<ExpansionProposal>> per_worker(static_cast<std::size_t>(cfg.workers));
  std::vector<int> refused(static_cast<std::size_t>(cfg.workers), 0);
  auto work = [&](int w) {
    QTableSnapshot snap = snaps[static_cast<std::size_t>(w)];
    for (int rank = w; rank < cfg.n_select; rank += cfg.workers) {
      ProposalRequest req{res.frontier, cfg.coeffs, &stats, &policy, rank, cfg.per_node, cfg.seed, cfg.round,
                          cfg.staleness_bound, cfg.rollout_latency_us};
      auto p = propose(snap, tree, req);
      if (!p && snap.staleness(tree) > static_cast<std::uint64_t>(cfg.staleness_bound)) {
        ++refused[static_cast<std::size_t>(w)];
        snap = QTableSnapshot::take(tree);
        p = propose(snap, tree, req);
      }
      if (p) per_worker[static_cast<std::size_t>(w)].push_back(std::move(*p));
    }
  };
  if (cfg.workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::vector<ExpansionProposal> proposals;
  for (auto& v : per_worker)
    for (auto& p : v) proposals.push_back(std::move(p));
  for (int r : refused) res.metrics.refused += r;
  res.metrics.proposals = static_cast<int>(proposals.size());

  if (cfg.drift_before_reconcile) cfg.drift_before_reconcile(tree);

  double drift = 0.0;
  for (NodeId id : res.frontier) drift += std::abs(tree.node(id).q_mean() - snaps.front().inputs(id).q_mean);
  res.metrics.q_drift = drift / static_cast<double>(res.frontier.size());

  res.outcome = reconcile(std::move(proposals), tree, cfg.coeffs, stats, cfg.accept_rank, cfg.budget);
  res.metrics.accepted = static_cast<int>(res.outcome.accepted.size());
  res.metrics.rolled_back = static_cast<int>(res.outcome.rolled_back.size());
  res.metrics.acceptance_rate = res.outcome.acceptance_rate;
  res.metrics.wasted = res.outcome.wasted;
  res.metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace rollout
