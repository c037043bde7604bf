#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rollout {

/// Dense creation-order node identifier. The root is always 0.
enum class NodeId : std::uint32_t {};

constexpr std::size_t index(NodeId id) noexcept { return static_cast<std::size_t>(id); }
constexpr NodeId to_node_id(std::size_t i) noexcept { return static_cast<NodeId>(static_cast<std::uint32_t>(i)); }

enum class Outcome : std::uint8_t { none, success, fail };

constexpr int reward_of(Outcome o) noexcept { return o == Outcome::success ? 1 : -1; }
constexpr Outcome outcome_of(int reward) noexcept { return reward > 0 ? Outcome::success : Outcome::fail; }

/// One decision of a rollout. `entropy` is the action entropy of the decision
/// taken at the state the step departs from; `state` is the state it arrives at.
struct Step {
  int action = 0;
  int state = 0;
  double entropy = 0.0;
  int tool_calls = 0;
};

struct Trajectory {
  NodeId start{0};
  int start_state = 0;
  int start_depth = 0;
  int start_cost = 0;
  std::vector<Step> steps;
  int reward = -1;  ///< terminal reward, always -1 or +1
  bool tool_capped = false;
  double temperature = 1.0;
  std::uint64_t policy_id = 0;
  std::vector<NodeId> path;  ///< root..leaf, filled in by integration

  int depth() const noexcept { return start_depth + static_cast<int>(steps.size()); }
  int tool_calls() const noexcept {
    int c = start_cost;
    for (const auto& s : steps) c += s.tool_calls;
    return c;
  }
};

struct TreeNode {
  NodeId id{0};
  std::optional<NodeId> parent;
  int depth = 0;
  std::vector<NodeId> children;
  int visits = 0;
  double reward_sum = 0.0;  ///< exact sum of backed-up rewards
  double entropy = 0.0;     ///< action entropy of the decision taken at this node (nats)
  int path_cost = 0;        ///< cumulative tool calls root -> node
  Outcome outcome = Outcome::none;
  std::uint64_t version = 0;
  int state = 0;    ///< environment state key
  int action = -1;  ///< action index taken at the parent to reach this node
  bool tool_capped = false;

  double q_mean() const noexcept { return visits > 0 ? reward_sum / visits : 0.0; }
  bool is_leaf() const noexcept { return outcome != Outcome::none; }
};

struct TreeLimits {
  int depth_cap = 6;
  int tool_cap = 5;
  int branching_cap = 8;  ///< a node stays expandable while it has fewer children
};

/// Prompt-rooted rollout tree. Single writer; copies are cheap value snapshots.
class RolloutTree {
 public:
  explicit RolloutTree(TreeLimits limits = {}, int root_state = 0);

  NodeId root() const noexcept { return NodeId{0}; }
  const TreeNode& node(NodeId id) const;
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<NodeId>& leaves() const noexcept { return leaves_; }
  int budget_used() const noexcept { return budget_used_; }
  std::uint64_t version() const noexcept { return version_; }
  std::uint64_t instance() const noexcept { return instance_; }
  const TreeLimits& limits() const noexcept { return limits_; }
  bool contains(NodeId id) const noexcept { return index(id) < nodes_.size(); }

  /// Adds the trajectory's unshared suffix and a fresh leaf. Returns the leaf.
  /// Throws StructuralError if the trajectory does not attach to the tree.
  NodeId integrate(Trajectory& traj);

  /// Propagates `reward` from `leaf` to the root and stamps a new version.
  void backup(NodeId leaf, int reward);

  NodeId add_rollout(Trajectory& traj) {
    const NodeId leaf = integrate(traj);
    backup(leaf, traj.reward);
    return leaf;
  }

  /// Node ids root..node inclusive.
  std::vector<NodeId> path_from_root(NodeId id) const;

  /// Rebuilds a tree from persisted node records (ids must be dense and ordered).
  static RolloutTree from_records(TreeLimits limits, std::vector<TreeNode> nodes, int budget_used,
                                  std::uint64_t version);

 private:
  NodeId create_child(NodeId parent, const Step& step, double entropy, Outcome outcome);

  TreeLimits limits_;
  std::vector<TreeNode> nodes_;
  std::vector<NodeId> leaves_;
  int budget_used_ = 0;
  std::uint64_t version_ = 0;
  std::uint64_t instance_ = 0;
};

/// Internal nodes with depth <= depth_cap, at least one visit, and fewer
/// children than the branching cap. Ascending NodeId order.
std::vector<NodeId> expandable_frontier(const RolloutTree& tree, int depth_cap);

struct OutcomeCounts {
  int n_success = 0;
  int n_fail = 0;

  bool mixed() const noexcept { return n_success > 0 && n_fail > 0; }
  bool uniform() const noexcept { return !mixed(); }
};

OutcomeCounts outcome_counts(const RolloutTree& tree);

/// Rebuilds the full root->leaf trajectory (steps, reward) for a leaf.
Trajectory rooted_trajectory(const RolloutTree& tree, NodeId leaf);

}  // namespace rollout
