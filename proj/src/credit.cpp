#include "rollout/credit.hpp"

#include <cmath>

#include "rollout/errors.hpp"

namespace rollout {

namespace {

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double pop_std(std::span<const double> xs) {
  const double m = mean_of(xs);
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(xs.size()));
}

}  // namespace

std::vector<double> grpo_advantages(std::span<const double> rewards, double eps) {
  if (rewards.empty()) throw DomainError("empty reward group");
  std::vector<double> out(rewards.size(), 0.0);
  const double first = rewards.front();
  bool uniform = true;
  for (double r : rewards) uniform = uniform && r == first;
  if (uniform) return out;
  const double m = mean_of(rewards);
  const double s = pop_std(rewards);
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - m) / (s + eps);
  return out;
}

double sibling_advantage(double q, std::span<const double> sibling_qs, double eps, SiblingConvention conv) {
  if (sibling_qs.empty()) return 0.0;
  std::vector<double> all(sibling_qs.begin(), sibling_qs.end());
  all.push_back(q);
  const double m = conv.mean_excludes_self ? mean_of(sibling_qs) : mean_of(all);
  const double s = conv.std_includes_self ? pop_std(all) : pop_std(sibling_qs);
  return (q - m) / (s + eps);
}

double sibling_advantage(const RolloutTree& tree, NodeId id, double eps, SiblingConvention conv) {
  const TreeNode& n = tree.node(id);
  if (!n.parent) return 0.0;
  std::vector<double> sib;
  for (NodeId c : tree.node(*n.parent).children)
    if (c != id) sib.push_back(tree.node(c).q_mean());
  return sibling_advantage(n.q_mean(), sib, eps, conv);
}

AdvantageRecord hierarchical_terms(const RolloutTree& tree, NodeId leaf, double alpha, double eps,
                                   SiblingConvention conv) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("decay must lie in (0, 1)");
  AdvantageRecord rec;
  for (NodeId id : tree.path_from_root(leaf)) {
    const TreeNode& n = tree.node(id);
    if (n.is_leaf()) continue;
    const double a = sibling_advantage(tree, id, eps, conv);
    const double w = std::pow(alpha, n.depth);
    rec.terms.push_back({id, a, w});
    rec.a_hier += w * a;
  }
  return rec;
}

double hierarchical_advantage(const RolloutTree& tree, NodeId leaf, double alpha, double eps,
                              SiblingConvention conv) {
  return hierarchical_terms(tree, leaf, alpha, eps, conv).a_hier;
}

double total_advantage(double a_grpo, double a_hier, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw DomainError("mixing coefficient must lie in [0, 1]");
  return (1.0 - lambda) * a_grpo + lambda * a_hier;
}

std::vector<AdvantageRecord> tree_advantages(const RolloutTree& tree, double lambda, double alpha, double eps,
                                             SiblingConvention conv) {
  std::vector<double> rewards;
  for (NodeId l : tree.leaves()) rewards.push_back(reward_of(tree.node(l).outcome));
  const auto grpo = grpo_advantages(rewards, eps);
  std::vector<AdvantageRecord> out;
  out.reserve(rewards.size());
  for (std::size_t i = 0; i < tree.leaves().size(); ++i) {
    AdvantageRecord rec = hierarchical_terms(tree, tree.leaves()[i], alpha, eps, conv);
    rec.a_grpo = grpo[i];
    rec.a_total = total_advantage(rec.a_grpo, rec.a_hier, lambda);
    out.push_back(std::move(rec));
  }
  return out;
}

Eigen::VectorXd weighted_score_sum(const SimPolicy& policy, std::span<const Trajectory> group,
                                   std::span<const double> advantages) {
  if (group.size() != advantages.size()) throw DomainError("one advantage per trajectory");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(policy.num_parameters());
  for (std::size_t i = 0; i < group.size(); ++i)
    if (advantages[i] != 0.0) g += advantages[i] * policy.score_gradient(group[i]);
  return g;
}

double gradient_mass(const SimPolicy& policy, std::span<const Trajectory> group, std::span<const double> advantages) {
  return weighted_score_sum(policy, group, advantages).squaredNorm();
}

double tree_gradient_mass(const SimPolicy& policy, const RolloutTree& tree, double lambda, double alpha) {
  const auto recs = tree_advantages(tree, lambda, alpha);
  std::vector<Trajectory> group;
  std::vector<double> adv;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    Trajectory t = rooted_trajectory(tree, tree.leaves()[i]);
    t.policy_id = policy.id();
    group.push_back(std::move(t));
    adv.push_back(recs[i].a_total);
  }
  return gradient_mass(policy, group, adv);
}

}  // namespace rollout
