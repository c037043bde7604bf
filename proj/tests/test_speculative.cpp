#include <doctest.h>

#include <algorithm>

#include "rollout/builder.hpp"
#include "rollout/errors.hpp"
#include "rollout/experiments.hpp"
#include "rollout/speculative.hpp"
#include "rollout/tree_io.hpp"

using namespace rollout;

namespace {

SimPolicy policy(std::uint64_t seed, double p = 0.35) {
  PromptSpec s;
  s.seed = seed;
  s.p = p;
  return SimPolicy::build(s);
}

std::string jsonl(const RolloutTree& t) { return tree_to_jsonl(t, {"p", "h", {}, {}}); }

bool contains(const std::vector<NodeId>& v, NodeId id) { return std::find(v.begin(), v.end(), id) != v.end(); }

}  // namespace

TEST_CASE("snapshot versions and staleness") {
  const SimPolicy pol = policy(1);
  RolloutTree tree;
  CHECK(QTableSnapshot::take(tree).version() == 0);
  BuildConfig cfg;
  RolloutTree built = initial_tree(pol, cfg);
  CHECK(QTableSnapshot::take(built).version() == 12);

  const QTableSnapshot snap = QTableSnapshot::take(built);
  const RolloutTree frozen = built;
  CHECK(snap.staleness(built) == 0);
  auto drift = make_drift_injector(pol, 3, 3);
  drift(built);
  CHECK(snap.staleness(built) == 3);
  for (const TreeNode& n : frozen.nodes()) {
    const ScoreInputs& in = snap.inputs(n.id);
    const ScoreInputs copy = score_inputs(frozen, n.id);
    CHECK(in.visits == copy.visits);
    CHECK(in.q_mean == copy.q_mean);
    CHECK(in.parent_visits == copy.parent_visits);
  }
  CHECK_THROWS_AS(snap.staleness(tree), DomainError);
}

TEST_CASE("one worker at zero staleness reproduces the sequential build byte for byte") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SimPolicy pol = policy(50 + seed);
    BuildConfig seq;
    seq.seed = seed;
    BuildConfig spec = seq;
    spec.speculative.enabled = true;
    spec.speculative.workers = 1;
    spec.speculative.staleness_bound = 0;
    CHECK(jsonl(build_tree(pol, seq).tree) == jsonl(build_tree(pol, spec).tree));

    // Several workers without drift also agree with the sequential order.
    seq.n_select = 3;
    seq.budget = 30;
    seq.rounds = 3;
    spec.n_select = 3;
    spec.budget = 30;
    spec.rounds = 3;
    spec.speculative.workers = 3;
    CHECK(jsonl(build_tree(pol, seq).tree) == jsonl(build_tree(pol, spec).tree));
  }
}

TEST_CASE("proposals: staleness bound refuses, a fresh snapshot behaves like the sequential choice") {
  const SimPolicy pol = policy(7);
  BuildConfig cfg;
  cfg.seed = 2;
  RolloutTree tree = initial_tree(pol, cfg);
  const DepthStats stats = fit_depth_stats(tree);
  const auto frontier = expandable_frontier(tree, cfg.limits.depth_cap);
  const auto sequential = select_top_n(score_frontier(tree, frontier, cfg.coeffs, stats), 1);

  ProposalRequest req{frontier, cfg.coeffs, &stats, &pol, 0, 2, cfg.seed, 1, 1, 0};
  const QTableSnapshot snap = QTableSnapshot::take(tree);
  const auto fresh = propose(snap, tree, req);
  REQUIRE(fresh);
  CHECK(fresh->node == sequential.front());
  CHECK(fresh->trajectories.size() == 2);

  make_drift_injector(pol, 4, 2)(tree);  // staleness 2 > bound 1
  CHECK_FALSE(propose(snap, tree, req));
  const auto redo = propose(QTableSnapshot::take(tree), tree, req);
  REQUIRE(redo);
  const auto now = select_top_n(score_frontier(tree, frontier, cfg.coeffs, stats), 1);
  CHECK(redo->node == now.front());

  req.rank = static_cast<int>(frontier.size());
  CHECK_FALSE(propose(QTableSnapshot::take(tree), tree, req));
}

TEST_CASE("reconcile: fresh rank one is accepted, nodes outside the window roll back without budget") {
  const SimPolicy pol = policy(9);
  BuildConfig cfg;
  cfg.seed = 5;
  RolloutTree tree = initial_tree(pol, cfg);
  const DepthStats stats = fit_depth_stats(tree);
  const auto frontier = expandable_frontier(tree, cfg.limits.depth_cap);
  REQUIRE(frontier.size() >= 2);
  const auto order = select_top_n(score_frontier(tree, frontier, cfg.coeffs, stats), static_cast<int>(frontier.size()));
  const QTableSnapshot snap = QTableSnapshot::take(tree);
  std::vector<ExpansionProposal> props;
  for (int rank : {0, static_cast<int>(order.size()) - 1}) {
    ProposalRequest req{frontier, cfg.coeffs, &stats, &pol, rank, 2, cfg.seed, 1, 0, 0};
    props.push_back(*propose(snap, tree, req));
  }
  const int before = tree.budget_used();
  const auto out = reconcile(props, tree, cfg.coeffs, stats, 1, 100);
  REQUIRE(out.accepted.size() == 1);
  CHECK(out.accepted[0].node == order.front());
  REQUIRE(out.rolled_back.size() == 1);
  CHECK(out.rolled_back[0].node == order.back());
  CHECK(tree.budget_used() == before + 2);
  CHECK(out.wasted == 2);
  CHECK(out.acceptance_rate == 0.5);
}

TEST_CASE("under injected drift every decision matches a sequential re-scoring oracle") {
  int rounds = 0, below_one = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SimPolicy pol = policy(200 + seed, 0.4);
    BuildConfig cfg;
    cfg.seed = seed;
    cfg.budget = 60;
    RolloutTree tree = initial_tree(pol, cfg);
    for (int round = 1; round <= 4; ++round) {
      const DepthStats stats = fit_depth_stats(tree);
      SpeculativeRoundConfig sc;
      sc.workers = 4;
      sc.staleness_bound = 2;
      sc.n_select = 4;
      sc.accept_rank = 4;
      sc.per_node = 2;
      sc.budget = cfg.budget;
      sc.seed = seed;
      sc.round = round;
      sc.drift_after_snapshot = make_drift_injector(pol, seed * 31 + round, 2);
      std::vector<NodeId> oracle_top;
      auto inject = make_drift_injector(pol, seed * 37 + round, 2);
      sc.drift_before_reconcile = [&](RolloutTree& t) {
        inject(t);
        const auto f = expandable_frontier(t, t.limits().depth_cap);
        if (!f.empty()) oracle_top = select_top_n(score_frontier(t, f, sc.coeffs, stats), sc.accept_rank);
      };
      const auto res = run_speculative_round(tree, pol, stats, sc);
      if (res.frontier.empty()) break;
      ++rounds;
      CHECK(res.outcome.fresh_top == oracle_top);
      for (const auto& p : res.outcome.accepted) CHECK(contains(oracle_top, p.node));
      for (const auto& p : res.outcome.rolled_back) {
        const bool dup = std::count_if(res.outcome.accepted.begin(), res.outcome.accepted.end(),
                                       [&](const ExpansionProposal& a) { return a.node == p.node; }) > 0;
        CHECK((!contains(oracle_top, p.node) || dup));
      }
      CHECK(res.outcome.accepted.size() + res.outcome.rolled_back.size() == static_cast<std::size_t>(res.metrics.proposals));
      below_one += res.metrics.acceptance_rate < 1.0;
      CHECK(tree.budget_used() <= cfg.budget + 2 * 2 * round);
    }
  }
  CHECK(rounds > 0);
  CHECK(below_one > 0);
}

TEST_CASE("invalid round settings") {
  const SimPolicy pol = policy(3);
  RolloutTree tree = initial_tree(pol, BuildConfig{});
  SpeculativeRoundConfig sc;
  sc.workers = 0;
  CHECK_THROWS_AS(run_speculative_round(tree, pol, fit_depth_stats(tree), sc), DomainError);
}
