#include "rollout/builder.hpp"

#include <algorithm>
#include <chrono>
#include <json.hpp>
#include <thread>

#include "rollout/errors.hpp"

namespace rollout {

void BuildConfig::validate() const {
  if (initial < 1) throw ConfigError("initial rollout count must be >= 1");
  if (rounds < 0) throw ConfigError("round count must be >= 0");
  if (n_select < 1) throw ConfigError("nodes per round must be >= 1");
  if (per_node < 1) throw ConfigError("rollouts per node must be >= 1");
  if (budget < initial) throw ConfigError("budget must cover the initial rollouts");
  if (limits.depth_cap < 0 || limits.tool_cap < 0 || limits.branching_cap < 1) throw ConfigError("invalid tree limits");
  if (coeffs.c < 0 || coeffs.lambda_h < 0 || coeffs.lambda_c < 0 || coeffs.lambda_d < 0)
    throw ConfigError("score coefficients must be non-negative");
  if (!(rescue_temperature > 0.0)) throw ConfigError("rescue temperature must be positive");
  if (speculative.enabled && (speculative.workers < 1 || speculative.staleness_bound < 0 || speculative.accept_rank < 0))
    throw ConfigError("invalid speculative settings");
}

namespace {

void add_sampled(RolloutTree& tree, const SimPolicy& policy, NodeId start, double temperature, CounterRng rng,
                 int latency_us) {
  Trajectory t = policy.sample(StartPoint::of(tree.node(start)), temperature, rng);
  if (latency_us > 0) std::this_thread::sleep_for(std::chrono::microseconds(latency_us));
  tree.add_rollout(t);
}

void check_policy(const SimPolicy& policy, const BuildConfig& cfg) {
  if (policy.spec().tool_cap != cfg.limits.tool_cap)
    throw ConfigError("policy tool cap differs from the build's tool cap");
}

}  // namespace

RolloutTree initial_tree(const SimPolicy& policy, const BuildConfig& cfg) {
  cfg.validate();
  check_policy(policy, cfg);
  RolloutTree tree(cfg.limits, 0);
  for (int i = 0; i < cfg.initial && tree.budget_used() < cfg.budget; ++i)
    add_sampled(tree, policy, tree.root(), 1.0, policy_stream(cfg.seed, policy, 0, 0, static_cast<std::uint64_t>(i)),
                cfg.rollout_latency_us);
  return tree;
}

RescueRecord rescue_if_uniform(RolloutTree& tree, const AllocatorModel& model, const SimPolicy& policy,
                               std::uint64_t seed, double temperature) {
  RescueRecord r;
  if (tree.leaves().empty() || outcome_counts(tree).mixed()) return r;
  r.evaluated = true;
  r.probability = model.predict(extract_features(policy.embedding(), tree));
  if (!(r.probability > model.threshold)) return r;
  CounterRng rng = rescue_stream(seed, policy);
  Trajectory t = policy.sample(StartPoint::of(tree.node(tree.root())), temperature, rng);
  tree.add_rollout(t);
  r.triggered = true;
  r.reward = t.reward;
  return r;
}

RoundRecord expand_round(RolloutTree& tree, const SimPolicy& policy, const DepthStats& stats, const BuildConfig& cfg,
                         int round) {
  RoundRecord rec;
  rec.round = round;
  rec.frontier = expandable_frontier(tree, cfg.limits.depth_cap);
  if (rec.frontier.empty()) {
    rec.skipped = true;
    rec.budget_after = tree.budget_used();
    return rec;
  }
  rec.scores = score_frontier(tree, rec.frontier, cfg.coeffs, stats);
  rec.selected = select_top_n(rec.scores, cfg.n_select);
  std::vector<NodeId> order = rec.selected;
  std::sort(order.begin(), order.end());
  for (NodeId id : order) {
    for (int k = 0; k < cfg.per_node && tree.budget_used() < cfg.budget; ++k)
      add_sampled(tree, policy, id, 1.0,
                  policy_stream(cfg.seed, policy, static_cast<std::uint64_t>(round), index(id),
                                static_cast<std::uint64_t>(k)),
                  cfg.rollout_latency_us);
  }
  rec.budget_after = tree.budget_used();
  return rec;
}

BuildResult build_tree(const SimPolicy& policy, const BuildConfig& cfg) {
  BuildResult res{initial_tree(policy, cfg), {}};
  RolloutTree& tree = res.tree;
  res.log.initial_rollouts = tree.budget_used();

  for (int round = 1; round <= cfg.rounds; ++round) {
    if (tree.budget_used() >= cfg.budget) break;
    RoundRecord rec;
    rec.round = round;
    const DepthStats stats = fit_depth_stats(tree);

    if (cfg.speculative.enabled) {
      SpeculativeRoundConfig sc;
      sc.workers = cfg.speculative.workers;
      sc.staleness_bound = cfg.speculative.staleness_bound;
      sc.n_select = cfg.n_select;
      sc.accept_rank = cfg.speculative.accept_rank > 0 ? cfg.speculative.accept_rank : cfg.n_select;
      sc.per_node = cfg.per_node;
      sc.budget = cfg.budget;
      sc.seed = cfg.seed;
      sc.round = round;
      sc.coeffs = cfg.coeffs;
      sc.rollout_latency_us = cfg.rollout_latency_us;
      sc.drift_after_snapshot = cfg.speculative.drift_after_snapshot;
      sc.drift_before_reconcile = cfg.speculative.drift_before_reconcile;
      SpeculativeRoundResult sr = run_speculative_round(tree, policy, stats, sc);
      rec.speculative = true;
      rec.frontier = sr.frontier;
      rec.skipped = sr.frontier.empty();
      for (const auto& p : sr.outcome.accepted) rec.selected.push_back(p.node);
      rec.metrics = sr.metrics;
    } else {
      rec = expand_round(tree, policy, stats, cfg, round);
    }
    rec.budget_after = tree.budget_used();
    res.log.rounds.push_back(std::move(rec));
  }

  if (tree.budget_used() > cfg.budget) throw InvariantViolation("expansion loop exceeded the leaf budget");
  if (cfg.allocator) res.log.rescue = rescue_if_uniform(tree, *cfg.allocator, policy, cfg.seed, cfg.rescue_temperature);
  if (tree.budget_used() > cfg.budget + 1 || tree.leaves().size() != static_cast<std::size_t>(tree.budget_used()))
    throw InvariantViolation("leaf budget law violated");
  return res;
}

std::string BuildLog::to_jsonl() const {
  std::string out;
  auto ids = [](const std::vector<NodeId>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (NodeId id : v) a.push_back(index(id));
    return a;
  };
  for (const RoundRecord& r : rounds) {
    nlohmann::json j;
    j["round"] = r.round;
    j["skipped"] = r.skipped;
    j["frontier"] = ids(r.frontier);
    nlohmann::json scores = nlohmann::json::array();
    for (const ScoredNode& s : r.scores)
      scores.push_back({{"node", index(s.node)},
                        {"q", s.score.q_term},
                        {"explore", s.score.explore_term},
                        {"entropy", s.score.entropy_term},
                        {"cost", s.score.cost_term},
                        {"depth", s.score.depth_term},
                        {"total", s.score.total}});
    j["scores"] = scores;
    j["selected"] = ids(r.selected);
    j["budget_after"] = r.budget_after;
    if (r.speculative) {
      j["proposals"] = r.metrics.proposals;
      j["accepted"] = r.metrics.accepted;
      j["rolled_back"] = r.metrics.rolled_back;
      j["refused"] = r.metrics.refused;
    }
    out += j.dump() + "\n";
  }
  nlohmann::json rescue{{"rescue_evaluated", this->rescue.evaluated},
                        {"rescue_probability", this->rescue.probability},
                        {"rescue_triggered", this->rescue.triggered},
                        {"initial_rollouts", initial_rollouts}};
  out += rescue.dump() + "\n";
  return out;
}

}  // namespace rollout
