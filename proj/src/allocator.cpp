#include "rollout/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "rollout/errors.hpp"
#include "rollout/rng.hpp"

namespace rollout {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd to_vector(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

nlohmann::json to_json_array(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

Eigen::VectorXd AllocatorFeatures::vector() const {
  Eigen::VectorXd x(embedding.size() + 3);
  x.head(embedding.size()) = embedding;
  x[embedding.size()] = n_success;
  x[embedding.size() + 1] = n_fail;
  x[embedding.size() + 2] = mean_entropy;
  return x;
}

double mean_path_entropy(const RolloutTree& tree) {
  double sum = 0.0;
  long steps = 0;
  for (NodeId leaf : tree.leaves()) {
    for (NodeId id : tree.path_from_root(leaf)) {
      const TreeNode& n = tree.node(id);
      if (n.is_leaf()) continue;
      sum += n.entropy;
      ++steps;
    }
  }
  return steps > 0 ? sum / static_cast<double>(steps) : 0.0;
}

AllocatorFeatures extract_features(const Eigen::VectorXd& embedding, const RolloutTree& tree) {
  if (tree.leaves().empty()) throw DomainError("features need at least one leaf");
  const OutcomeCounts c = outcome_counts(tree);
  return {embedding, c.n_success, c.n_fail, mean_path_entropy(tree)};
}

AllocatorModel AllocatorModel::zeros(int input_dim, int width) {
  AllocatorModel m;
  m.input_shift = Eigen::VectorXd::Zero(input_dim);
  m.input_scale = Eigen::VectorXd::Ones(input_dim);
  m.w1 = Eigen::MatrixXd::Zero(width, input_dim);
  m.b1 = Eigen::VectorXd::Zero(width);
  m.w2 = Eigen::VectorXd::Zero(width);
  return m;
}

double AllocatorModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw DomainError("feature dimension does not match the model");
  const Eigen::VectorXd xs = ((x - input_shift).array() / input_scale.array()).matrix();
  const Eigen::VectorXd h = (w1 * xs + b1).cwiseMax(0.0);
  return sigmoid(w2.dot(h) + b2);
}

std::string AllocatorModel::to_json() const {
  nlohmann::json j;
  j["input_dim"] = input_dim();
  j["width"] = width();
  j["threshold"] = threshold;
  j["input_shift"] = to_json_array(input_shift);
  j["input_scale"] = to_json_array(input_scale);
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < w1.rows(); ++r) rows.push_back(to_json_array(w1.row(r).transpose()));
  j["w1"] = rows;
  j["b1"] = to_json_array(b1);
  j["w2"] = to_json_array(w2);
  j["b2"] = b2;
  return j.dump(1);
}

AllocatorModel AllocatorModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("allocator weights are not valid JSON: ") + e.what());
  }
  const int d = j.at("input_dim").get<int>();
  const int w = j.at("width").get<int>();
  AllocatorModel m = zeros(d, w);
  m.threshold = j.value("threshold", 0.5);
  if (j.contains("input_shift")) m.input_shift = to_vector(j["input_shift"]);
  if (j.contains("input_scale")) m.input_scale = to_vector(j["input_scale"]);
  const auto& rows = j.at("w1");
  if (static_cast<int>(rows.size()) != w) throw DomainError("w1 row count disagrees with width");
  for (int r = 0; r < w; ++r) {
    if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != d)
      throw DomainError("w1 column count disagrees with input_dim");
    m.w1.row(r) = to_vector(rows[static_cast<std::size_t>(r)]).transpose();
  }
  m.b1 = to_vector(j.at("b1"));
  m.w2 = to_vector(j.at("w2"));
  m.b2 = j.at("b2").get<double>();
  if (m.b1.size() != w || m.w2.size() != w || m.input_shift.size() != d || m.input_scale.size() != d)
    throw DomainError("allocator weight shapes are inconsistent");
  if (!m.w1.allFinite() || !m.b1.allFinite() || !m.w2.allFinite() || !std::isfinite(m.b2))
    throw DomainError("allocator weights must be finite");
  return m;
}

RescueExample label_tree(const RolloutTree& tree, const SimPolicy& policy, std::uint64_t build_seed,
                         double temperature) {
  const OutcomeCounts c = outcome_counts(tree);
  if (c.mixed()) throw DomainError("rescue labels are only defined on uniform-outcome trees");
  if (tree.leaves().empty()) throw DomainError("cannot label an empty tree");
  CounterRng rng = rescue_stream(build_seed, policy);
  const Trajectory extra = policy.sample(StartPoint::of(tree.node(tree.root())), temperature, rng);
  const Outcome uniform_class = c.n_success > 0 ? Outcome::success : Outcome::fail;
  return {extract_features(policy.embedding(), tree), outcome_of(extra.reward) != uniform_class};
}

Eigen::MatrixXd feature_matrix(std::span<const RescueExample> data) {
  if (data.empty()) return {};
  const Eigen::Index d = data.front().features.vector().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), d);
  for (std::size_t i = 0; i < data.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = data[i].features.vector();
  return x;
}

std::vector<int> label_vector(std::span<const RescueExample> data) {
  std::vector<int> y;
  y.reserve(data.size());
  for (const auto& e : data) y.push_back(e.rescued ? 1 : 0);
  return y;
}

AllocatorModel train_allocator(std::span<const RescueExample> data, const TrainHyper& hyper) {
  return train_allocator(feature_matrix(data), label_vector(data), hyper);
}

AllocatorModel train_allocator(const Eigen::MatrixXd& x, std::span<const int> labels, const TrainHyper& hyper) {
  const Eigen::Index n = x.rows();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) throw DomainError("training set is empty or misaligned");
  long pos = 0;
  for (int l : labels) pos += l == 1;
  if (pos == 0 || pos == n) throw DomainError("training set must contain both classes");
  if (hyper.width < 1 || hyper.epochs < 0 || !(hyper.lr > 0.0)) throw DomainError("invalid training hyperparameters");

  const Eigen::Index d = x.cols();
  AllocatorModel m = AllocatorModel::zeros(static_cast<int>(d), hyper.width);
  m.input_shift = x.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double s = std::sqrt((x.col(j).array() - m.input_shift[j]).square().mean());
    m.input_scale[j] = s > 1e-12 ? s : 1.0;
  }
  const Eigen::MatrixXd xs =
      (x.rowwise() - m.input_shift.transpose()).array().rowwise() / m.input_scale.transpose().array();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)];

  CounterRng rng(hyper.seed, 0x4D4C5031ULL, 0, 0);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d));
  for (Eigen::Index r = 0; r < m.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < d; ++c) m.w1(r, c) = s1 * rng.normal();
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hyper.width));
  for (Eigen::Index r = 0; r < m.w2.size(); ++r) m.w2[r] = s2 * rng.normal();

  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Eigen::MatrixXd pre = xs * m.w1.transpose();
    pre.rowwise() += m.b1.transpose();
    const Eigen::MatrixXd h = pre.cwiseMax(0.0);
    Eigen::VectorXd z = h * m.w2;
    z.array() += m.b2;
    const Eigen::VectorXd p = z.unaryExpr([](double v) { return sigmoid(v); });
    const Eigen::VectorXd dz = (p - y) * inv_n;

    const Eigen::VectorXd g_w2 = h.transpose() * dz + hyper.l2 * m.w2;
    const double g_b2 = dz.sum();
    const Eigen::MatrixXd dh = (dz * m.w2.transpose()).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd g_w1 = dh.transpose() * xs + hyper.l2 * m.w1;
    const Eigen::VectorXd g_b1 = dh.colwise().sum().transpose();

    m.w2 -= hyper.lr * g_w2;
    m.b2 -= hyper.lr * g_b2;
    m.w1 -= hyper.lr * g_w1;
    m.b1 -= hyper.lr * g_b1;
  }
  return m;
}

double bce_loss(const AllocatorModel& model, const Eigen::MatrixXd& x, std::span<const int> labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double p = std::clamp(model.predict(x.row(i).transpose()), 1e-12, 1.0 - 1e-12);
    loss -= labels[static_cast<std::size_t>(i)] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return loss / static_cast<double>(x.rows());
}

}  // namespace rollout
