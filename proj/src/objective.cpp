#include "rollout/objective.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "rollout/errors.hpp"

namespace rollout {

double coverage(std::span<const double> leaf_qs, double variance_weight) {
  if (leaf_qs.empty()) throw DomainError("coverage of an empty leaf set");
  double m = 0.0;
  for (double q : leaf_qs) m += q;
  m /= static_cast<double>(leaf_qs.size());
  double v = 0.0;
  for (double q : leaf_qs) v += (q - m) * (q - m);
  v /= static_cast<double>(leaf_qs.size());
  return m - variance_weight * v;
}

double novelty(std::span<const int> visit_counts) {
  long total = 0;
  for (int c : visit_counts) {
    if (c < 0) throw DomainError("visit counts must be non-negative");
    total += c;
  }
  if (total == 0) throw DomainError("novelty needs a positive visit count");
  double h = 0.0;
  for (int c : visit_counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

int contrast(const RolloutTree& tree) {
  const auto nodes = tree.nodes();
  std::vector<std::uint8_t> seen(nodes.size(), 0);  // bit 0: success below, bit 1: fail below
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const TreeNode& n = nodes[i];
    if (n.outcome == Outcome::success) seen[i] = 1;
    if (n.outcome == Outcome::fail) seen[i] = 2;
    for (NodeId c : n.children) seen[i] |= seen[index(c)];
  }
  int count = 0;
  for (const TreeNode& n : nodes) {
    if (n.is_leaf()) continue;
    int with_success = 0, with_fail = 0, with_both = 0;
    for (NodeId c : n.children) {
      const std::uint8_t s = seen[index(c)];
      with_success += (s & 1) != 0;
      with_fail += (s & 2) != 0;
      with_both += s == 3;
    }
    // Two different children must carry the two outcomes.
    if (with_success > 0 && with_fail > 0 && !(with_success == 1 && with_fail == 1 && with_both == 1)) ++count;
  }
  return count;
}

ObjectiveTerms objective_terms(const RolloutTree& tree, const ObjectiveWeights& w) {
  std::vector<double> qs;
  qs.reserve(tree.leaves().size());
  for (NodeId l : tree.leaves()) qs.push_back(tree.node(l).q_mean());
  std::vector<int> visits;
  visits.reserve(tree.size());
  for (const TreeNode& n : tree.nodes()) visits.push_back(n.visits);

  ObjectiveTerms t;
  t.coverage = coverage(qs, w.variance_weight);
  t.novelty = novelty(visits);
  t.contrast = contrast(tree);
  t.value = w.alpha_q * t.coverage + w.alpha_n * t.novelty + w.alpha_h * t.contrast;
  return t;
}

double objective_value(const RolloutTree& tree, const ObjectiveWeights& w) { return objective_terms(tree, w).value; }

RolloutTree expanded_tree(const ExpansionModel& model, std::uint32_t mask) {
  RolloutTree tree = model.base;
  for (std::size_t i = 0; i < model.candidates.size(); ++i) {
    if (!(mask >> i & 1U)) continue;
    for (Trajectory t : model.rollouts[i]) tree.add_rollout(t);
  }
  return tree;
}

ScheduleProblem::ScheduleProblem(ExpansionModel model, ObjectiveWeights weights)
    : model_(std::move(model)), weights_(weights) {
  if (model_.candidates.size() != model_.rollouts.size()) throw DomainError("each candidate needs a rollout list");
  if (size() > kMaxCandidates) throw DomainError("too many candidates for exhaustive evaluation");
  for (std::size_t i = 1; i < model_.candidates.size(); ++i)
    if (!(model_.candidates[i - 1] < model_.candidates[i])) throw DomainError("candidates must be strictly ascending");
  cache_.assign(std::size_t{1} << size(), ObjectiveTerms{});
  known_.assign(cache_.size(), false);
}

const ObjectiveTerms& ScheduleProblem::terms(std::uint32_t mask) const {
  if (mask >= cache_.size()) throw DomainError("mask outside the ground set");
  if (!known_[mask]) {
    cache_[mask] = objective_terms(expanded_tree(model_, mask), weights_);
    known_[mask] = true;
  }
  return cache_[mask];
}

double ScheduleProblem::value(std::uint32_t mask) const { return terms(mask).value; }

double ScheduleProblem::marginal_gain(std::uint32_t mask, int v) const {
  if (v < 0 || v >= size()) throw DomainError("candidate index out of range");
  if (mask >> v & 1U) throw DomainError("candidate already in the set");
  return value(mask | (1U << v)) - value(mask);
}

std::vector<int> greedy_schedule(const SetFunction& f, int n, int budget) {
  if (budget < 0) throw DomainError("budget must be non-negative");
  std::vector<int> picks;
  std::uint32_t mask = 0;
  double current = f(0);
  while (static_cast<int>(picks.size()) < std::min(budget, n)) {
    int best = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < n; ++v) {
      if (mask >> v & 1U) continue;
      const double g = f(mask | (1U << v)) - current;
      if (g > best_gain) {
        best_gain = g;
        best = v;
      }
    }
    picks.push_back(best);
    mask |= 1U << best;
    current = f(mask);
  }
  return picks;
}

BruteForceResult brute_force_schedule(const SetFunction& f, int n, int budget) {
  if (n > ScheduleProblem::kMaxCandidates) throw DomainError("refusing exhaustive search over more than 20 candidates");
  if (budget < 0) throw DomainError("budget must be non-negative");
  BruteForceResult best{0, f(0)};
  const std::uint32_t end = 1U << n;
  for (std::uint32_t m = 1; m < end; ++m) {
    if (std::popcount(m) > budget) continue;
    const double v = f(m);
    if (v > best.value) best = {m, v};
  }
  return best;
}

SetFunctionCheck check_set_function(const SetFunction& f, int n, double tol) {
  if (n > ScheduleProblem::kMaxCandidates) throw DomainError("refusing exhaustive check over more than 20 candidates");
  SetFunctionCheck r;
  const std::uint32_t end = 1U << n;
  for (std::uint32_t a = 0; a < end; ++a) {
    const double fa = f(a);
    for (int u = 0; u < n; ++u) {
      if (a >> u & 1U) continue;
      const double fau = f(a | (1U << u));
      if (fau < fa - tol) {
        r.monotone = false;
        ++r.monotone_violations;
      }
      for (int v = u + 1; v < n; ++v) {
        if (a >> v & 1U) continue;
        ++r.checked;
        const double lhs = fau + f(a | (1U << v));
        const double rhs = f(a | (1U << u) | (1U << v)) + fa;
        if (lhs < rhs - tol) {
          r.submodular = false;
          ++r.submodular_violations;
        }
      }
    }
  }
  return r;
}

std::uint32_t mask_of(std::span<const int> picks) {
  std::uint32_t m = 0;
  for (int p : picks) m |= 1U << p;
  return m;
}

}  // namespace rollout
