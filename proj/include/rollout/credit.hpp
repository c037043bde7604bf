#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "rollout/sim_env.hpp"
#include "rollout/tree.hpp"

namespace rollout {

inline constexpr double kAdvantageEps = 1e-8;

/// (r - mean) / (population std + eps). A uniform group maps to all zeros.
std::vector<double> grpo_advantages(std::span<const double> rewards, double eps = kAdvantageEps);

struct SiblingConvention {
  bool mean_excludes_self = true;  ///< sibling mean over the other children only
  bool std_includes_self = true;   ///< std over all children of the parent
};

/// (q - sibling mean) / (sibling std + eps); 0 when there are no siblings.
double sibling_advantage(double q, std::span<const double> sibling_qs, double eps = kAdvantageEps,
                         SiblingConvention conv = {});

/// Sibling advantage of a tree node against the other children of its parent.
double sibling_advantage(const RolloutTree& tree, NodeId id, double eps = kAdvantageEps, SiblingConvention conv = {});

struct SiblingTerm {
  NodeId node{0};
  double a_sib = 0.0;
  double weight = 0.0;  ///< alpha^depth
};

struct AdvantageRecord {
  double a_grpo = 0.0;
  double a_hier = 0.0;
  double a_total = 0.0;
  std::vector<SiblingTerm> terms;
};

/// Decayed sum over the internal nodes of the root->leaf path of `leaf`.
AdvantageRecord hierarchical_terms(const RolloutTree& tree, NodeId leaf, double alpha, double eps = kAdvantageEps,
                                   SiblingConvention conv = {});

double hierarchical_advantage(const RolloutTree& tree, NodeId leaf, double alpha, double eps = kAdvantageEps,
                              SiblingConvention conv = {});

/// (1 - lambda) a_grpo + lambda a_hier.
double total_advantage(double a_grpo, double a_hier, double lambda);

/// Advantage records for every leaf of the tree, in leaf order. The GRPO group is the tree's leaves.
std::vector<AdvantageRecord> tree_advantages(const RolloutTree& tree, double lambda, double alpha,
                                             double eps = kAdvantageEps, SiblingConvention conv = {});

/// || sum_i A_i grad log pi(tau_i) ||^2.
double gradient_mass(const SimPolicy& policy, std::span<const Trajectory> group, std::span<const double> advantages);

/// Summed advantage-weighted score vector of a group.
Eigen::VectorXd weighted_score_sum(const SimPolicy& policy, std::span<const Trajectory> group,
                                   std::span<const double> advantages);

/// Gradient mass of a tree's leaf group under the mixed tree advantage.
double tree_gradient_mass(const SimPolicy& policy, const RolloutTree& tree, double lambda, double alpha);

struct RifbSample {
  int group_id = 0;
  double sigma = 0.0;  ///< population std of group rewards
  double objective = 0.0;
  double rifb = 0.0;
};

}  // namespace rollout
