#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rollout/tree.hpp"

namespace rollout {

struct ObjectiveWeights {
  double alpha_q = 1.0;
  double alpha_n = 1.0;
  double alpha_h = 1.0;
  double variance_weight = 0.5;  ///< the 1/2 in mean - var/2; 0 makes coverage modular in the leaf set
};

/// mean(qs) - variance_weight * population variance(qs).
double coverage(std::span<const double> leaf_qs, double variance_weight = 0.5);

/// Shannon entropy (nats) of the normalized counts. Zero counts are skipped.
double novelty(std::span<const int> visit_counts);

/// Internal nodes with two distinct children whose subtrees hold leaves of
/// different outcomes.
int contrast(const RolloutTree& tree);

struct ObjectiveTerms {
  double coverage = 0.0;
  double novelty = 0.0;
  int contrast = 0;
  double value = 0.0;
};

ObjectiveTerms objective_terms(const RolloutTree& tree, const ObjectiveWeights& w);
double objective_value(const RolloutTree& tree, const ObjectiveWeights& w);

/// Offline evaluation model for expansion schedules: each candidate node owns a
/// fixed list of pre-drawn rollouts that "expanding" it integrates.
struct ExpansionModel {
  RolloutTree base;
  std::vector<NodeId> candidates;                ///< ascending
  std::vector<std::vector<Trajectory>> rollouts;  ///< parallel to candidates
};

/// Base tree plus the rollouts of every candidate whose bit is set, integrated
/// in ascending NodeId order.
RolloutTree expanded_tree(const ExpansionModel& model, std::uint32_t mask);

using SetFunction = std::function<double(std::uint32_t)>;

/// Memoized set function over an expansion model. Masks index `candidates`.
class ScheduleProblem {
 public:
  static constexpr int kMaxCandidates = 20;

  ScheduleProblem(ExpansionModel model, ObjectiveWeights weights);

  int size() const noexcept { return static_cast<int>(model_.candidates.size()); }
  const ExpansionModel& model() const noexcept { return model_; }
  double value(std::uint32_t mask) const;
  /// Component values for the expansion set; cached alongside value().
  const ObjectiveTerms& terms(std::uint32_t mask) const;
  /// F(S + v) - F(S). Throws DomainError if v is already in S.
  double marginal_gain(std::uint32_t mask, int v) const;
  SetFunction function() const {
    return [this](std::uint32_t m) { return value(m); };
  }

 private:
  ExpansionModel model_;
  ObjectiveWeights weights_;
  mutable std::vector<ObjectiveTerms> cache_;
  mutable std::vector<bool> known_;
};

/// Greedy by marginal gain, min(budget, n) picks, ties to the lower index.
std::vector<int> greedy_schedule(const SetFunction& f, int n, int budget);

struct BruteForceResult {
  std::uint32_t mask = 0;
  double value = 0.0;
};

/// Exact maximum over all subsets of size <= budget (ties to the numerically smaller mask).
BruteForceResult brute_force_schedule(const SetFunction& f, int n, int budget);

struct SetFunctionCheck {
  bool submodular = true;
  bool monotone = true;
  long checked = 0;
  long submodular_violations = 0;
  long monotone_violations = 0;
};

/// Exhaustive check: F(A+u) + F(A+v) >= F(A+u+v) + F(A) for every A and u, v outside A,
/// and F(A+v) >= F(A) for every A and v outside A.
SetFunctionCheck check_set_function(const SetFunction& f, int n, double tol = 1e-12);

std::uint32_t mask_of(std::span<const int> picks);

}  // namespace rollout
