#include "rollout/tree.hpp"

#include <algorithm>
#include <atomic>
#include <string>

#include "rollout/errors.hpp"

namespace rollout {

namespace {

std::uint64_t next_instance() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

RolloutTree::RolloutTree(TreeLimits limits, int root_state) : limits_(limits), instance_(next_instance()) {
  TreeNode root;
  root.state = root_state;
  nodes_.push_back(root);
}

const TreeNode& RolloutTree::node(NodeId id) const {
  if (!contains(id)) throw StructuralError("unknown node id " + std::to_string(index(id)));
  return nodes_[index(id)];
}

NodeId RolloutTree::create_child(NodeId parent, const Step& step, double entropy, Outcome outcome) {
  TreeNode child;
  child.id = to_node_id(nodes_.size());
  child.parent = parent;
  child.depth = nodes_[index(parent)].depth + 1;
  child.path_cost = nodes_[index(parent)].path_cost + step.tool_calls;
  child.entropy = entropy;
  child.outcome = outcome;
  child.state = step.state;
  child.action = step.action;
  nodes_.push_back(std::move(child));
  const NodeId id = nodes_.back().id;
  nodes_[index(parent)].children.push_back(id);
  if (outcome != Outcome::none) leaves_.push_back(id);
  return id;
}

NodeId RolloutTree::integrate(Trajectory& traj) {
  if (!contains(traj.start)) throw StructuralError("trajectory start node is not in the tree");
  if (nodes_[index(traj.start)].is_leaf()) throw StructuralError("trajectory starts at a leaf");
  if (traj.steps.empty()) throw StructuralError("trajectory has no steps");
  if (traj.reward != 1 && traj.reward != -1) throw DomainError("terminal reward must be -1 or +1");
  if (traj.start_depth != nodes_[index(traj.start)].depth || traj.start_state != nodes_[index(traj.start)].state)
    throw StructuralError("trajectory start disagrees with the tree");

  if (traj.start == root() && nodes_[0].visits == 0 && leaves_.empty()) nodes_[0].entropy = traj.steps.front().entropy;

  NodeId cur = traj.start;
  const std::size_t n = traj.steps.size();
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const Step& step = traj.steps[t];
    NodeId next{0};
    bool found = false;
    for (NodeId c : nodes_[index(cur)].children) {
      const TreeNode& child = nodes_[index(c)];
      if (child.is_leaf() || child.action != step.action) continue;
      if (child.state != step.state) throw StructuralError("trajectory state disagrees with existing node");
      next = c;
      found = true;
      break;
    }
    if (!found) next = create_child(cur, step, traj.steps[t + 1].entropy, Outcome::none);
    cur = next;
  }
  // Every rollout contributes exactly one fresh leaf, even for duplicate paths.
  const NodeId leaf = create_child(cur, traj.steps.back(), 0.0, outcome_of(traj.reward));
  nodes_[index(leaf)].tool_capped = traj.tool_capped;
  ++budget_used_;
  traj.path = path_from_root(leaf);
  return leaf;
}

void RolloutTree::backup(NodeId leaf, int reward) {
  const TreeNode& l = node(leaf);
  if (!l.is_leaf()) throw StructuralError("backup must start at a leaf");
  if (reward != 1 && reward != -1) throw DomainError("terminal reward must be -1 or +1");
  if (reward_of(l.outcome) != reward) throw DomainError("backed-up reward disagrees with the leaf outcome");
  ++version_;
  std::optional<NodeId> cur = leaf;
  while (cur) {
    TreeNode& n = nodes_[index(*cur)];
    n.visits += 1;
    n.reward_sum += reward;
    n.version = version_;
    cur = n.parent;
  }
}

std::vector<NodeId> RolloutTree::path_from_root(NodeId id) const {
  std::vector<NodeId> path;
  std::optional<NodeId> cur = node(id).id;
  while (cur) {
    path.push_back(*cur);
    cur = nodes_[index(*cur)].parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

RolloutTree RolloutTree::from_records(TreeLimits limits, std::vector<TreeNode> nodes, int budget_used,
                                      std::uint64_t version) {
  if (nodes.empty()) throw StructuralError("tree record has no nodes");
  RolloutTree tree(limits, nodes.front().state);
  tree.nodes_.clear();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    TreeNode& n = nodes[i];
    if (index(n.id) != i) throw StructuralError("node ids must be dense and in creation order");
    n.children.clear();
    if (i == 0) {
      if (n.parent) throw StructuralError("root must not have a parent");
    } else {
      if (!n.parent || index(*n.parent) >= i) throw StructuralError("parent must precede child");
      if (n.depth != nodes[index(*n.parent)].depth + 1) throw StructuralError("depth must be parent depth + 1");
      nodes[index(*n.parent)].children.push_back(n.id);
    }
  }
  tree.nodes_ = std::move(nodes);
  for (const auto& n : tree.nodes_)
    if (n.is_leaf()) tree.leaves_.push_back(n.id);
  tree.budget_used_ = budget_used;
  tree.version_ = version;
  return tree;
}

std::vector<NodeId> expandable_frontier(const RolloutTree& tree, int depth_cap) {
  std::vector<NodeId> out;
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf() || n.depth > depth_cap || n.visits < 1) continue;
    if (static_cast<int>(n.children.size()) >= tree.limits().branching_cap) continue;
    out.push_back(n.id);
  }
  return out;
}

OutcomeCounts outcome_counts(const RolloutTree& tree) {
  OutcomeCounts c;
  for (NodeId id : tree.leaves()) {
    if (tree.node(id).outcome == Outcome::success)
      ++c.n_success;
    else
      ++c.n_fail;
  }
  return c;
}

Trajectory rooted_trajectory(const RolloutTree& tree, NodeId leaf) {
  const TreeNode& l = tree.node(leaf);
  if (!l.is_leaf()) throw StructuralError("rooted_trajectory needs a leaf");
  Trajectory t;
  t.path = tree.path_from_root(leaf);
  t.start_state = tree.node(tree.root()).state;
  for (std::size_t i = 1; i < t.path.size(); ++i) {
    const TreeNode& parent = tree.node(t.path[i - 1]);
    const TreeNode& child = tree.node(t.path[i]);
    t.steps.push_back({child.action, child.state, parent.entropy, child.path_cost - parent.path_cost});
  }
  t.reward = reward_of(l.outcome);
  t.tool_capped = l.tool_capped;
  return t;
}

}  // namespace rollout
