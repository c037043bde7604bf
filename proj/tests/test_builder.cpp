#include <doctest.h>

#include <memory>

#include "rollout/builder.hpp"
#include "rollout/errors.hpp"
#include "rollout/tree_io.hpp"

using namespace rollout;

namespace {

SimPolicy policy(std::uint64_t seed, double p) {
  PromptSpec s;
  s.seed = seed;
  s.p = p;
  return SimPolicy::build(s);
}

std::shared_ptr<const AllocatorModel> constant_model(int dim, double logit) {
  AllocatorModel m = AllocatorModel::zeros(dim, 4);
  m.b2 = logit;
  return std::make_shared<const AllocatorModel>(m);
}

}  // namespace

TEST_CASE("defaults give 12 + 2 * (1 * 2) = 16 leaves") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SimPolicy pol = policy(100 + seed, 0.3);
    BuildConfig cfg;
    cfg.seed = seed;
    const BuildResult r = build_tree(pol, cfg);
    CHECK(r.tree.leaves().size() == 16);
    CHECK(r.tree.budget_used() == 16);
    CHECK(r.log.initial_rollouts == 12);
    CHECK(r.log.rounds.size() == 2);
    for (const auto& round : r.log.rounds) {
      CHECK(round.selected.size() <= 1);
      for (NodeId id : round.selected) CHECK(!r.tree.node(id).is_leaf());
    }
  }
}

TEST_CASE("budget equal to the initial batch runs no rounds") {
  const SimPolicy pol = policy(1, 0.3);
  BuildConfig cfg;
  cfg.budget = 12;
  const BuildResult r = build_tree(pol, cfg);
  CHECK(r.log.rounds.empty());
  CHECK(r.tree.budget_used() == 12);
}

TEST_CASE("a budget that ends mid-round stops every loop") {
  const SimPolicy pol = policy(2, 0.3);
  BuildConfig cfg;
  cfg.n_select = 3;
  cfg.per_node = 2;
  cfg.budget = 15;
  const BuildResult r = build_tree(pol, cfg);
  CHECK(r.tree.budget_used() == 15);
  CHECK(r.log.rounds.size() == 1);
}

TEST_CASE("rounds draw at most n_select * per_node rollouts") {
  const SimPolicy pol = policy(3, 0.4);
  BuildConfig cfg;
  cfg.rounds = 5;
  cfg.n_select = 2;
  cfg.per_node = 3;
  cfg.budget = 100;
  const BuildResult r = build_tree(pol, cfg);
  int prev = r.log.initial_rollouts;
  for (const auto& round : r.log.rounds) {
    CHECK(round.budget_after - prev <= 6);
    prev = round.budget_after;
  }
  CHECK(r.log.rounds.size() == 5);
}

TEST_CASE("builds are deterministic down to the serialized bytes") {
  const SimPolicy pol = policy(4, 0.25);
  BuildConfig cfg;
  cfg.seed = 77;
  const BuildResult a = build_tree(pol, cfg), b = build_tree(pol, cfg);
  CHECK(tree_to_jsonl(a.tree, {"x", "h", {}, {}}) == tree_to_jsonl(b.tree, {"x", "h", {}, {}}));
  CHECK(a.log.to_jsonl() == b.log.to_jsonl());
  cfg.seed = 78;
  CHECK(tree_to_jsonl(build_tree(pol, cfg).tree, {"x", "h", {}, {}}) != tree_to_jsonl(a.tree, {"x", "h", {}, {}}));
}

TEST_CASE("rescue hook: only uniform trees and only above the threshold") {
  // p = 0 makes every tree all-fail.
  const SimPolicy pol = policy(5, 0.0);
  const int dim = 32 + 3;
  BuildConfig cfg;
  cfg.allocator = constant_model(dim, 4.0);
  BuildResult yes = build_tree(pol, cfg);
  CHECK(yes.log.rescue.evaluated);
  CHECK(yes.log.rescue.triggered);
  CHECK(yes.tree.budget_used() == 17);

  cfg.allocator = constant_model(dim, std::log(0.34 / 0.66));
  BuildResult no = build_tree(pol, cfg);
  CHECK(no.log.rescue.evaluated);
  CHECK(no.log.rescue.probability == doctest::Approx(0.34));
  CHECK_FALSE(no.log.rescue.triggered);
  CHECK(no.tree.budget_used() == 16);

  // Find a mixed tree; the hook must leave it alone.
  const SimPolicy mixed = policy(6, 0.5);
  cfg.allocator = constant_model(dim, 4.0);
  BuildResult m = build_tree(mixed, cfg);
  REQUIRE(outcome_counts(m.tree).mixed());
  CHECK_FALSE(m.log.rescue.evaluated);
  CHECK(m.tree.budget_used() == 16);
}

TEST_CASE("invalid configurations raise ConfigError") {
  const SimPolicy pol = policy(7, 0.3);
  auto expect_bad = [&](auto mutate) {
    BuildConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(build_tree(pol, cfg), ConfigError);
  };
  expect_bad([](BuildConfig& c) { c.budget = 2; });
  expect_bad([](BuildConfig& c) { c.initial = 0; });
  expect_bad([](BuildConfig& c) { c.n_select = 0; });
  expect_bad([](BuildConfig& c) { c.per_node = 0; });
  expect_bad([](BuildConfig& c) { c.coeffs.lambda_c = -1; });
  expect_bad([](BuildConfig& c) { c.limits.tool_cap = 3; });  // differs from the policy's cap
  expect_bad([](BuildConfig& c) { c.rescue_temperature = 0; });
}

TEST_CASE("first-round selection is the top UUCB node of the initial frontier") {
  const SimPolicy pol = policy(8, 0.35);
  BuildConfig cfg;
  cfg.seed = 9;
  const BuildResult r = build_tree(pol, cfg);
  const RolloutTree init = initial_tree(pol, cfg);
  const auto frontier = expandable_frontier(init, cfg.limits.depth_cap);
  const auto scored = score_frontier(init, frontier, cfg.coeffs, fit_depth_stats(init));
  REQUIRE(!r.log.rounds.empty());
  CHECK(r.log.rounds[0].frontier == frontier);
  CHECK(r.log.rounds[0].selected == select_top_n(scored, 1));
}
