#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rollout/sim_env.hpp"
#include "rollout/tree.hpp"

namespace rollout {

struct AllocatorFeatures {
  Eigen::VectorXd embedding;
  int n_success = 0;
  int n_fail = 0;
  double mean_entropy = 0.0;  ///< flat mean of step entropies over every leaf path

  Eigen::VectorXd vector() const;
};

/// Mean action entropy over all steps of all root->leaf paths.
double mean_path_entropy(const RolloutTree& tree);

AllocatorFeatures extract_features(const Eigen::VectorXd& embedding, const RolloutTree& tree);

/// Two-layer perceptron with input standardization and a sigmoid output.
struct AllocatorModel {
  Eigen::VectorXd input_shift;
  Eigen::VectorXd input_scale;
  Eigen::MatrixXd w1;  ///< width x input_dim
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
  double threshold = 0.5;

  int input_dim() const noexcept { return static_cast<int>(w1.cols()); }
  int width() const noexcept { return static_cast<int>(w1.rows()); }

  /// Model with all weights zero (predicts exactly 0.5) and identity standardization.
  static AllocatorModel zeros(int input_dim, int width);

  double predict(const Eigen::VectorXd& x) const;
  double predict(const AllocatorFeatures& f) const { return predict(f.vector()); }

  std::string to_json() const;
  static AllocatorModel from_json(const std::string& text);
};

struct RescueExample {
  AllocatorFeatures features;
  bool rescued = false;
};

/// Draws the rescue rollout the builder would draw and labels the tree by
/// whether it changes the outcome class. Only defined on uniform-outcome trees.
RescueExample label_tree(const RolloutTree& tree, const SimPolicy& policy, std::uint64_t build_seed,
                         double temperature = 1.2);

struct TrainHyper {
  double lr = 0.2;
  int epochs = 600;
  int width = 64;
  double l2 = 1e-4;
  std::uint64_t seed = 7;
};

AllocatorModel train_allocator(std::span<const RescueExample> data, const TrainHyper& hyper);
AllocatorModel train_allocator(const Eigen::MatrixXd& x, std::span<const int> labels, const TrainHyper& hyper);

/// Mean binary cross-entropy of the model on a labelled set.
double bce_loss(const AllocatorModel& model, const Eigen::MatrixXd& x, std::span<const int> labels);

Eigen::MatrixXd feature_matrix(std::span<const RescueExample> data);
std::vector<int> label_vector(std::span<const RescueExample> data);

}  // namespace rollout
