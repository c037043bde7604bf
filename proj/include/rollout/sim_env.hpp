#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "rollout/rng.hpp"
#include "rollout/tree.hpp"

namespace rollout {

/// Generative parameters for one simulated prompt.
struct PromptSpec {
  std::uint64_t seed = 0;
  double p = 0.5;  ///< success probability of an independent rollout at temperature 1
  int branching_min = 2;
  int branching_max = 3;
  int min_depth = 2;  ///< no terminal states above this depth
  int max_depth = 8;  ///< every state at this depth is terminal
  double stop_prob = 0.4;
  double sharpness_min = 0.1;
  double sharpness_max = 1.2;
  double spread_base = 0.3;  ///< child propensity spread at zero entropy
  double coupling = 2.5;     ///< added spread per unit of normalized entropy
  double coupling_power = 8.0;  ///< spread grows with h_norm^power; entropies crowd near 1
  int tool_cap = 5;
  double cost_p1 = 0.4;  ///< probability an action costs one tool call
  double cost_p2 = 0.1;  ///< probability an action costs two tool calls
  bool rescuable = false;
  double rescue_uplift = 0.0;  ///< success uplift at temperature >= 1.2 for rescuable prompts
  int embedding_dim = 32;
  double embedding_signal = 1.0;
};

/// Where a rollout begins: a tree node and the environment state behind it.
struct StartPoint {
  NodeId node{0};
  int state = 0;
  int depth = 0;
  int cost = 0;

  static StartPoint of(const TreeNode& n) { return {n.id, n.state, n.depth, n.path_cost}; }
};

/// Softmax policy over a latent decision tree with terminal success
/// probabilities. Immutable after construction; sampling is pure given the
/// random stream.
class SimPolicy {
 public:
  static SimPolicy build(const PromptSpec& spec);

  std::uint64_t id() const noexcept { return id_; }
  const PromptSpec& spec() const noexcept { return spec_; }
  bool rescuable() const noexcept { return spec_.rescuable; }
  const Eigen::VectorXd& embedding() const noexcept { return embedding_; }

  int num_states() const noexcept { return static_cast<int>(states_.size()); }
  int num_parameters() const noexcept { return static_cast<int>(logits_.size()); }
  const Eigen::VectorXd& parameters() const noexcept { return logits_; }
  bool is_terminal(int state) const { return states_.at(static_cast<std::size_t>(state)).n_children == 0; }
  int state_depth(int state) const { return states_.at(static_cast<std::size_t>(state)).depth; }
  int num_actions(int state) const { return states_.at(static_cast<std::size_t>(state)).n_children; }

  /// Same latent structure and terminal outcomes, different logits.
  SimPolicy with_parameters(const Eigen::VectorXd& logits) const;

  /// Same latent structure re-calibrated to a new target success probability.
  SimPolicy recalibrated(double p) const;

  Eigen::VectorXd action_probabilities(int state, double temperature) const;
  double action_entropy(int state, double temperature) const;
  double terminal_success(int state, double temperature) const;

  /// Exact success probability of a rollout from `start` (tool cap enforced).
  double success_probability(double temperature = 1.0) const;
  double success_probability_from(int state, int cost, double temperature) const;

  /// Mass of rollouts from the root that finish under the tool cap.
  double uncapped_mass() const;

  Trajectory sample(const StartPoint& start, double temperature, CounterRng& rng) const;

  /// log pi(traj) under an arbitrary logit vector with this policy's structure.
  double log_prob(const Trajectory& traj, const Eigen::VectorXd& logits) const;

  /// d log pi(traj) / d logits: one-hot minus probabilities per step, scaled by 1/temperature.
  Eigen::VectorXd score_gradient(const Trajectory& traj) const;

  /// Expected success gap |v_i - v_j| between two different first actions at `state`,
  /// weighted by how often the pair is drawn.
  double sibling_divergence(int state, int cost) const;

 private:
  struct LatentState {
    int depth = 0;
    int first_child = -1;  ///< index into child_state_/edge_cost_/logits_
    int n_children = 0;
    double propensity = 0.0;
  };

  SimPolicy() = default;
  void calibrate(double p);
  void validate(const Trajectory& traj) const;
  double value(int state, int cost, double temperature, std::vector<double>& memo) const;

  PromptSpec spec_;
  std::uint64_t id_ = 0;
  std::vector<LatentState> states_;
  std::vector<int> child_state_;
  std::vector<int> edge_cost_;
  Eigen::VectorXd logits_;
  std::vector<double> base_q_;  ///< terminal success probability at temperature 1
  Eigen::VectorXd embedding_;
};

/// Random stream for one rollout of a build. Phase 0 is the initial batch,
/// phases 1..L the expansion rounds; slot is the start node's id.
inline CounterRng policy_stream(std::uint64_t seed, const SimPolicy& policy, std::uint64_t phase, std::uint64_t slot,
                                std::uint64_t draw) {
  return CounterRng(seed ^ policy.id(), phase, slot, draw);
}

inline constexpr std::uint64_t kRescuePhase = 0x52455343ULL;

/// Stream of the single high-temperature rescue rollout of a build.
inline CounterRng rescue_stream(std::uint64_t seed, const SimPolicy& policy) {
  return policy_stream(seed, policy, kRescuePhase, 0, 0);
}

Trajectory sample_trajectory(const SimPolicy& policy, const StartPoint& start, double temperature, CounterRng& rng);
Eigen::VectorXd score_gradient(const SimPolicy& policy, const Trajectory& traj);

// ---------------------------------------------------------------------------
// Collapse law for independent sampling.

/// Probability that all `budget` independent rollouts agree: p^B + (1-p)^B.
double exact_collapse(double p, int budget);

struct CollapseBounds {
  double lower = 0.0;                 ///< max(p, 1-p)^B, a lower bound on collapse
  double union_upper_noncollapse = 0; ///< B * min(p, 1-p), an upper bound on non-collapse
};

CollapseBounds collapse_bounds(double p, int budget);

struct CollapseEstimate {
  double p = 0.0;
  int budget = 0;
  long trials = 0;
  double empirical_rate = 0.0;
  double exact_rate = 0.0;
  double binomial_sigma = 0.0;  ///< sqrt(exact (1 - exact) / trials)

  double z_score() const { return binomial_sigma > 0 ? (empirical_rate - exact_rate) / binomial_sigma : 0.0; }
};

CollapseEstimate monte_carlo_collapse(double p, int budget, long trials, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Prompt corpora.

enum class DifficultyProfile { fixed, uniform, heavy_tail };

struct CorpusSpec {
  int n_prompts = 100;
  std::uint64_t seed = 1;
  DifficultyProfile difficulty = DifficultyProfile::heavy_tail;
  double fixed_p = 0.5;
  double easy_fraction = 0.2;  ///< heavy_tail: share of prompts drawn near p = 1
  double tail_exponent = 2.5;  ///< heavy_tail: p = scale * U^exponent
  double tail_scale = 0.6;
  bool coupling = true;
  double rescuable_fraction = 0.4;
  double rescue_uplift = 0.75;
  double embedding_signal = 1.0;
  PromptSpec base{};
};

/// The i-th prompt of a corpus. Target p is clipped to what the tool cap allows.
PromptSpec corpus_prompt(const CorpusSpec& corpus, int i);

std::vector<SimPolicy> make_corpus(const CorpusSpec& corpus);

}  // namespace rollout
