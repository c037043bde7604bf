#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <map>

#include "rollout/errors.hpp"
#include "rollout/experiments.hpp"
#include "rollout/objective.hpp"
#include "rollout/rng.hpp"

using namespace rollout;

namespace {

Trajectory path(std::initializer_list<std::pair<int, int>> steps, int reward) {
  Trajectory t;
  for (auto [a, s] : steps) t.steps.push_back({a, s, 0.5, 0});
  t.reward = reward;
  return t;
}

Trajectory from(const RolloutTree& tree, NodeId start, std::initializer_list<std::pair<int, int>> steps, int reward) {
  Trajectory t = path(steps, reward);
  const TreeNode& n = tree.node(start);
  t.start = start;
  t.start_state = n.state;
  t.start_depth = n.depth;
  t.start_cost = n.path_cost;
  return t;
}

// Recursive oracle for the mixed-node count: label each subtree, then count
// nodes where a success-bearing child differs from a fail-bearing child.
int contrast_oracle(const RolloutTree& tree) {
  std::map<std::size_t, std::pair<bool, bool>> memo;
  std::function<std::pair<bool, bool>(NodeId)> label = [&](NodeId id) {
    const TreeNode& n = tree.node(id);
    std::pair<bool, bool> r{n.outcome == Outcome::success, n.outcome == Outcome::fail};
    for (NodeId c : n.children) {
      auto s = label(c);
      r.first |= s.first;
      r.second |= s.second;
    }
    memo[index(id)] = r;
    return r;
  };
  label(tree.root());
  int count = 0;
  for (const TreeNode& n : tree.nodes()) {
    if (n.is_leaf()) continue;
    bool found = false;
    for (NodeId a : n.children)
      for (NodeId b : n.children)
        if (a != b && memo[index(a)].first && memo[index(b)].second) found = true;
    count += found;
  }
  return count;
}

RolloutTree random_tree(CounterRng& rng, int rollouts) {
  RolloutTree tree;
  for (int i = 0; i < rollouts; ++i) {
    Trajectory t;
    int state = 0;
    const int depth = 1 + static_cast<int>(rng.below(4));
    for (int d = 0; d < depth; ++d) {
      const int a = static_cast<int>(rng.below(3));
      state = state * 3 + a + 1;
      t.steps.push_back({a, state, rng.uniform(), 0});
    }
    t.reward = rng.bernoulli(0.5) ? 1 : -1;
    tree.add_rollout(t);
  }
  return tree;
}

OracleParams small_oracle() {
  OracleParams p;
  p.instances = 40;
  p.max_candidates = 8;
  return p;
}

}  // namespace

TEST_CASE("coverage examples and a two-pass oracle") {
  CHECK(coverage(std::vector<double>{0.5}) == 0.5);
  CHECK(coverage(std::vector<double>{1.0, -1.0}) == -0.5);
  CHECK_THROWS_AS(coverage(std::vector<double>{}), DomainError);

  CounterRng rng(3);
  std::vector<double> qs(20);
  for (double& q : qs) q = 2.0 * rng.uniform() - 1.0;
  long double sum = 0;
  for (double q : qs) sum += q;
  const long double m = sum / qs.size();
  long double ss = 0;
  for (double q : qs) ss += (q - m) * (q - m);
  const double expected = static_cast<double>(m - 0.5L * ss / qs.size());
  CHECK(std::abs(coverage(qs) - expected) < 1e-12);
}

TEST_CASE("novelty examples") {
  for (int k = 1; k <= 9; ++k) CHECK(novelty(std::vector<int>(static_cast<std::size_t>(k), 4)) == doctest::Approx(std::log(k)));
  CHECK(novelty(std::vector<int>{7, 0, 0}) == 0.0);
  const double oracle = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  CHECK(novelty(std::vector<int>{3, 1}) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(novelty(std::vector<int>{3, 1}) == doctest::Approx(0.5623).epsilon(1e-4));
  CHECK_THROWS_AS(novelty(std::vector<int>{0, 0}), DomainError);
}

TEST_CASE("contrast examples") {
  RolloutTree all_fail;
  for (int i = 0; i < 4; ++i) {
    Trajectory t = path({{i % 2, i % 2 + 1}, {0, 9 + i}}, -1);
    all_fail.add_rollout(t);
  }
  CHECK(contrast(all_fail) == 0);

  RolloutTree two_leaves;
  Trajectory s = path({{0, 1}}, 1), f = path({{1, 2}}, -1);
  two_leaves.add_rollout(s);
  two_leaves.add_rollout(f);
  CHECK(contrast(two_leaves) == 1);

  // A single child holding both outcomes mixes only that child.
  RolloutTree chain;
  Trajectory a = path({{0, 1}, {0, 2}}, 1), b = path({{0, 1}, {1, 3}}, -1);
  chain.add_rollout(a);
  chain.add_rollout(b);
  CHECK(contrast(chain) == 1);
}

TEST_CASE("property: contrast matches the recursive oracle and F is the weighted component sum") {
  CounterRng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const RolloutTree tree = random_tree(rng, 1 + static_cast<int>(rng.below(30)));
    CHECK(contrast(tree) == contrast_oracle(tree));

    std::vector<double> qs;
    for (NodeId l : tree.leaves()) qs.push_back(tree.node(l).q_mean());
    std::vector<int> visits;
    for (const TreeNode& n : tree.nodes()) visits.push_back(n.visits);
    const ObjectiveWeights w{1.0, 1.0, 1.0, 0.5};
    const double sum = coverage(qs) + novelty(visits) + contrast_oracle(tree);
    CHECK(objective_value(tree, w) == doctest::Approx(sum).epsilon(1e-12));
    CHECK(objective_value(tree, {0.0, 0.0, 1.0, 0.5}) == contrast(tree));
  }
}

TEST_CASE("weights (1,0,0) on a single leaf give its Q") {
  RolloutTree tree;
  Trajectory t = path({{0, 1}}, 1);
  tree.add_rollout(t);
  CHECK(objective_value(tree, {1.0, 0.0, 0.0, 0.5}) == 1.0);
}

TEST_CASE("marginal gains on hand-built expansion models") {
  RolloutTree base;
  Trajectory t = path({{0, 1}, {0, 2}}, -1);
  base.add_rollout(t);
  const NodeId a{1};

  ExpansionModel divergent{base, {a}, {{from(base, a, {{1, 5}}, 1)}}};
  const ScheduleProblem p1(divergent, {0.0, 0.0, 2.0, 0.5});
  CHECK(p1.marginal_gain(0, 0) == 2.0);

  ExpansionModel failing{base, {a}, {{from(base, a, {{1, 5}}, -1)}}};
  const ScheduleProblem p2(failing, {0.0, 0.0, 1.0, 0.5});
  CHECK(p2.marginal_gain(0, 0) == 0.0);
  CHECK_THROWS_AS(p2.marginal_gain(1, 0), DomainError);
  CHECK_THROWS_AS(p2.marginal_gain(0, 3), DomainError);
}

TEST_CASE("schedule edge cases on a synthetic modular function") {
  const std::vector<double> weight{0.3, 1.2, 0.05, 0.9, 0.7, 0.2};
  const int n = static_cast<int>(weight.size());
  const SetFunction f = [&](std::uint32_t m) {
    double s = 0;
    for (int i = 0; i < n; ++i)
      if (m >> i & 1U) s += weight[static_cast<std::size_t>(i)];
    return s;
  };
  CHECK(greedy_schedule(f, n, 0).empty());
  CHECK(greedy_schedule(f, n, 10) == std::vector<int>{1, 3, 4, 0, 5, 2});
  CHECK(brute_force_schedule(f, n, n).mask == (1U << n) - 1);
  // Modular: the optimum is the top-k by individual gain.
  CHECK(brute_force_schedule(f, n, 3).mask == mask_of(std::vector<int>{1, 3, 4}));
  CHECK(mask_of(greedy_schedule(f, n, 3)) == brute_force_schedule(f, n, 3).mask);
  const auto check = check_set_function(f, n);
  CHECK(check.submodular);
  CHECK(check.monotone);
  CHECK_THROWS_AS(brute_force_schedule(f, 21, 2), DomainError);
  CHECK_THROWS_AS(greedy_schedule(f, n, -1), DomainError);
}

TEST_CASE("greedy reaches 1 - 1/e on random weighted-coverage functions") {
  CounterRng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 10, universe = 15;
    std::vector<std::uint32_t> covers(n);
    std::vector<double> elem_w(universe);
    for (double& w : elem_w) w = rng.uniform();
    for (auto& c : covers)
      for (int e = 0; e < universe; ++e)
        if (rng.bernoulli(0.25)) c |= 1U << e;
    const SetFunction f = [&](std::uint32_t m) {
      std::uint32_t u = 0;
      for (int i = 0; i < n; ++i)
        if (m >> i & 1U) u |= covers[static_cast<std::size_t>(i)];
      double s = 0;
      for (int e = 0; e < universe; ++e)
        if (u >> e & 1U) s += elem_w[static_cast<std::size_t>(e)];
      return s;
    };
    REQUIRE(check_set_function(f, n).submodular);
    const double g = f(mask_of(greedy_schedule(f, n, 4)));
    const double opt = brute_force_schedule(f, n, 4).value;
    CHECK(g >= (1.0 - 1.0 / std::exp(1.0)) * opt - 1e-9);
  }
}

TEST_CASE("schedule problems built from simulated trees") {
  const OracleParams p = small_oracle();
  long contrast_submodular = 0, novelty_monotone = 0, coverage_submodular = 0, full_submodular = 0;
  for (int i = 0; i < p.instances; ++i) {
    const ScheduleProblem prob(oracle_instance(p, i), p.weights);
    const int n = prob.size();
    REQUIRE(n >= 1);
    const SetFunction f = prob.function();

    // Singleton consistency.
    for (int v = 0; v < n; ++v) CHECK(f(1U << v) - f(0) == doctest::Approx(prob.marginal_gain(0, v)).epsilon(1e-12));

    // Exhaustive oracle over all subsets of size <= 4.
    double best = f(0);
    for (std::uint32_t m = 0; m < (1U << n); ++m)
      if (std::popcount(m) <= 4) best = std::max(best, f(m));
    CHECK(brute_force_schedule(f, n, 4).value == best);

    const auto con = check_set_function([&](std::uint32_t m) { return double(prob.terms(m).contrast); }, n);
    CHECK(con.monotone);
    contrast_submodular += con.submodular;
    novelty_monotone += check_set_function([&](std::uint32_t m) { return prob.terms(m).novelty; }, n).monotone;
    coverage_submodular +=
        check_set_function([&](std::uint32_t m) { return prob.terms(m).coverage; }, n).submodular;
    const auto full = check_set_function(f, n);
    full_submodular += full.submodular;
    if (full.submodular) {
      const double base = f(0);
      const double g = f(mask_of(greedy_schedule(f, n, 4))) - base;
      const double opt = brute_force_schedule(f, n, 4).value - base;
      CHECK(g >= (1.0 - 1.0 / std::exp(1.0)) * opt - 1e-9);
    }
  }
  MESSAGE("contrast submodular on " << contrast_submodular << "/" << p.instances << ", novelty monotone on "
                                    << novelty_monotone << ", coverage submodular on " << coverage_submodular
                                    << ", full F submodular on " << full_submodular);
}

TEST_CASE("sampled nested-pair submodularity rates for novelty and coverage are reported") {
  const OracleParams p = small_oracle();
  CounterRng rng(17);
  long pairs = 0, novelty_bad = 0, coverage_bad = 0;
  for (int i = 0; pairs < 600; i = (i + 1) % p.instances) {
    const ScheduleProblem prob(oracle_instance(p, i), p.weights);
    const int n = prob.size();
    if (n < 2) continue;
    for (int r = 0; r < 20; ++r) {
      const int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      std::uint32_t b = 0, a = 0;
      for (int u = 0; u < n; ++u) {
        if (u == v || !rng.bernoulli(0.5)) continue;
        b |= 1U << u;
        if (rng.bernoulli(0.5)) a |= 1U << u;
      }
      const auto gain = [&](std::uint32_t s, auto field) { return field(prob.terms(s | (1U << v))) - field(prob.terms(s)); };
      const auto nov = [](const ObjectiveTerms& t) { return t.novelty; };
      const auto cov = [](const ObjectiveTerms& t) { return t.coverage; };
      novelty_bad += gain(a, nov) < gain(b, nov) - 1e-12;
      coverage_bad += gain(a, cov) < gain(b, cov) - 1e-12;
      ++pairs;
    }
  }
  CHECK(pairs >= 500);
  MESSAGE("nested pairs " << pairs << ": novelty violations " << novelty_bad << ", coverage violations "
                          << coverage_bad);
}
