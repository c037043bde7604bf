#include "rollout/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>

#include "rollout/errors.hpp"

namespace rollout {

namespace {

constexpr int kPhaseLatent = 0x4C41;
constexpr int kPhaseEmbed = 0x454D;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

double entropy_of(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

/// Fixed unit direction shared by every prompt so that leaked signal is learnable.
Eigen::VectorXd shared_direction(int dim, std::uint64_t which) {
  CounterRng rng(0xD1EC7105ULL, which, static_cast<std::uint64_t>(dim), 0);
  Eigen::VectorXd d(dim);
  for (int i = 0; i < dim; ++i) d[i] = rng.normal();
  return d / d.norm();
}

}  // namespace

SimPolicy SimPolicy::build(const PromptSpec& spec) {
  if (spec.min_depth < 1 || spec.max_depth < spec.min_depth) throw DomainError("invalid latent depth range");
  if (spec.branching_min < 1 || spec.branching_max < spec.branching_min) throw DomainError("invalid branching range");
  if (spec.p < 0.0 || spec.p > 1.0) throw DomainError("success probability must lie in [0, 1]");
  if (spec.tool_cap < 0) throw DomainError("tool cap must be non-negative");

  SimPolicy pol;
  pol.spec_ = spec;
  pol.id_ = hash_words({spec.seed, 0x504F4C49ULL});
  CounterRng rng(spec.seed, kPhaseLatent, 0, 0);

  std::vector<double> logits;
  pol.states_.push_back({0, -1, 0, 0.0});
  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    const int depth = pol.states_[static_cast<std::size_t>(s)].depth;
    const bool terminal =
        depth >= spec.max_depth || (depth >= spec.min_depth && rng.uniform() < spec.stop_prob);
    if (terminal) continue;

    const int b = spec.branching_min + static_cast<int>(rng.below(spec.branching_max - spec.branching_min + 1));
    const double sharpness = spec.sharpness_min + (spec.sharpness_max - spec.sharpness_min) * rng.uniform();
    Eigen::VectorXd z(b);
    for (int i = 0; i < b; ++i) z[i] = sharpness * std::clamp(rng.normal(), -2.0, 2.0);
    const double h_norm = b > 1 ? entropy_of(softmax(z)) / std::log(static_cast<double>(b)) : 0.0;
    const double spread = spec.spread_base + spec.coupling * std::pow(h_norm, spec.coupling_power);

    const double parent_propensity = pol.states_[static_cast<std::size_t>(s)].propensity;
    pol.states_[static_cast<std::size_t>(s)].first_child = static_cast<int>(pol.child_state_.size());
    pol.states_[static_cast<std::size_t>(s)].n_children = b;
    for (int i = 0; i < b; ++i) {
      const int child = static_cast<int>(pol.states_.size());
      pol.states_.push_back({depth + 1, -1, 0, parent_propensity + spread * rng.normal()});
      pol.child_state_.push_back(child);
      const double u = rng.uniform();
      pol.edge_cost_.push_back(u < spec.cost_p2 ? 2 : (u < spec.cost_p2 + spec.cost_p1 ? 1 : 0));
      logits.push_back(z[i]);
      queue.push_back(child);
    }
  }
  pol.logits_ = Eigen::Map<Eigen::VectorXd>(logits.data(), static_cast<Eigen::Index>(logits.size()));
  pol.calibrate(spec.p);

  CounterRng erng(spec.seed, kPhaseEmbed, 0, 0);
  const int dim = spec.embedding_dim;
  pol.embedding_ = Eigen::VectorXd(dim);
  for (int i = 0; i < dim; ++i) pol.embedding_[i] = erng.normal();
  if (dim > 0) {
    const double sign = spec.rescuable ? 1.0 : -1.0;
    pol.embedding_ += spec.embedding_signal * sign * shared_direction(dim, 1);
    const double logit_p = std::log((spec.p + 1e-3) / (1.0 - spec.p + 1e-3));
    pol.embedding_ += 0.3 * logit_p * shared_direction(dim, 2);
  }
  return pol;
}

SimPolicy SimPolicy::with_parameters(const Eigen::VectorXd& logits) const {
  if (logits.size() != logits_.size()) throw DomainError("parameter vector has the wrong dimension");
  SimPolicy copy = *this;
  copy.logits_ = logits;
  return copy;
}

SimPolicy SimPolicy::recalibrated(double p) const {
  SimPolicy copy = *this;
  copy.spec_.p = p;
  copy.calibrate(p);
  return copy;
}

void SimPolicy::calibrate(double p) {
  base_q_.assign(states_.size(), 0.0);
  auto assign = [&](double shift) {
    for (std::size_t s = 0; s < states_.size(); ++s)
      if (states_[s].n_children == 0) base_q_[s] = std::isinf(shift) ? (shift > 0 ? 1.0 : 0.0)
                                                                      : sigmoid(states_[s].propensity + shift);
  };
  const double reachable = uncapped_mass();
  if (p > reachable + 1e-12)
    throw DomainError("target success probability exceeds the mass of rollouts under the tool cap");
  if (p <= 0.0) {
    assign(-INFINITY);
    return;
  }
  if (p >= reachable) {
    assign(INFINITY);
    return;
  }
  double lo = -80.0, hi = 80.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    assign(mid);
    const double f = success_probability(1.0);
    if (std::abs(f - p) < 1e-13) return;
    (f < p ? lo : hi) = mid;
  }
  assign(0.5 * (lo + hi));
}

Eigen::VectorXd SimPolicy::action_probabilities(int state, double temperature) const {
  if (temperature <= 0.0) throw DomainError("temperature must be positive");
  const LatentState& s = states_.at(static_cast<std::size_t>(state));
  if (s.n_children == 0) throw DomainError("terminal state has no actions");
  return softmax(logits_.segment(s.first_child, s.n_children) / temperature);
}

double SimPolicy::action_entropy(int state, double temperature) const {
  return entropy_of(action_probabilities(state, temperature));
}

double SimPolicy::terminal_success(int state, double temperature) const {
  double q = base_q_.at(static_cast<std::size_t>(state));
  if (spec_.rescuable && temperature > 1.0) {
    const double u = spec_.rescue_uplift * std::clamp((temperature - 1.0) / 0.2, 0.0, 1.0);
    q = 1.0 - (1.0 - q) * (1.0 - u);
  }
  return q;
}

double SimPolicy::value(int state, int cost, double temperature, std::vector<double>& memo) const {
  const std::size_t slot = static_cast<std::size_t>(state) * static_cast<std::size_t>(spec_.tool_cap + 1) +
                           static_cast<std::size_t>(cost);
  if (memo[slot] >= 0.0) return memo[slot];
  const LatentState& s = states_[static_cast<std::size_t>(state)];
  double v = 0.0;
  if (s.n_children == 0) {
    v = terminal_success(state, temperature);
  } else {
    const Eigen::VectorXd probs = softmax(logits_.segment(s.first_child, s.n_children) / temperature);
    for (int i = 0; i < s.n_children; ++i) {
      const int c = cost + edge_cost_[static_cast<std::size_t>(s.first_child + i)];
      if (c > spec_.tool_cap) continue;
      v += probs[i] * value(child_state_[static_cast<std::size_t>(s.first_child + i)], c, temperature, memo);
    }
  }
  memo[slot] = v;
  return v;
}

double SimPolicy::success_probability(double temperature) const { return success_probability_from(0, 0, temperature); }

double SimPolicy::success_probability_from(int state, int cost, double temperature) const {
  if (temperature <= 0.0) throw DomainError("temperature must be positive");
  if (cost > spec_.tool_cap) return 0.0;
  std::vector<double> memo(states_.size() * static_cast<std::size_t>(spec_.tool_cap + 1), -1.0);
  return value(state, cost, temperature, memo);
}

double SimPolicy::uncapped_mass() const {
  SimPolicy probe = *this;
  probe.spec_.rescuable = false;
  probe.base_q_.assign(states_.size(), 0.0);
  for (std::size_t s = 0; s < states_.size(); ++s)
    if (states_[s].n_children == 0) probe.base_q_[s] = 1.0;
  return probe.success_probability(1.0);
}

Trajectory SimPolicy::sample(const StartPoint& start, double temperature, CounterRng& rng) const {
  if (temperature <= 0.0) throw DomainError("temperature must be positive");
  if (is_terminal(start.state)) throw DomainError("cannot roll out from a terminal state");
  Trajectory t;
  t.start = start.node;
  t.start_state = start.state;
  t.start_depth = start.depth;
  t.start_cost = start.cost;
  t.temperature = temperature;
  t.policy_id = id_;

  int cur = start.state;
  int cost = start.cost;
  while (true) {
    const LatentState& s = states_[static_cast<std::size_t>(cur)];
    if (s.n_children == 0) {
      t.reward = rng.bernoulli(terminal_success(cur, temperature)) ? 1 : -1;
      break;
    }
    const Eigen::VectorXd probs = softmax(logits_.segment(s.first_child, s.n_children) / temperature);
    const double u = rng.uniform();
    int a = 0;
    double acc = probs[0];
    while (u >= acc && a + 1 < s.n_children) acc += probs[++a];
    const std::size_t edge = static_cast<std::size_t>(s.first_child + a);
    const int child = child_state_[edge];
    const int c = edge_cost_[edge];
    cost += c;
    t.steps.push_back({a, child, entropy_of(probs), c});
    if (cost > spec_.tool_cap) {
      t.tool_capped = true;
      t.reward = -1;
      break;
    }
    cur = child;
  }
  return t;
}

void SimPolicy::validate(const Trajectory& traj) const {
  if (traj.policy_id != 0 && traj.policy_id != id_) throw DomainError("trajectory was sampled from another policy");
  int cur = traj.start_state;
  if (cur < 0 || cur >= num_states()) throw DomainError("trajectory start state is not part of this policy");
  for (const Step& step : traj.steps) {
    const LatentState& s = states_[static_cast<std::size_t>(cur)];
    if (step.action < 0 || step.action >= s.n_children ||
        child_state_[static_cast<std::size_t>(s.first_child + step.action)] != step.state)
      throw DomainError("trajectory is not a path of this policy");
    cur = step.state;
  }
}

double SimPolicy::log_prob(const Trajectory& traj, const Eigen::VectorXd& logits) const {
  validate(traj);
  if (logits.size() != logits_.size()) throw DomainError("parameter vector has the wrong dimension");
  double lp = 0.0;
  int cur = traj.start_state;
  for (const Step& step : traj.steps) {
    const LatentState& s = states_[static_cast<std::size_t>(cur)];
    const Eigen::VectorXd z = logits.segment(s.first_child, s.n_children) / traj.temperature;
    const double m = z.maxCoeff();
    lp += z[step.action] - m - std::log((z.array() - m).exp().sum());
    cur = step.state;
  }
  return lp;
}

Eigen::VectorXd SimPolicy::score_gradient(const Trajectory& traj) const {
  validate(traj);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(logits_.size());
  int cur = traj.start_state;
  const double inv_t = 1.0 / traj.temperature;
  for (const Step& step : traj.steps) {
    const LatentState& s = states_[static_cast<std::size_t>(cur)];
    const Eigen::VectorXd probs = softmax(logits_.segment(s.first_child, s.n_children) * inv_t);
    g.segment(s.first_child, s.n_children) -= probs * inv_t;
    g[s.first_child + step.action] += inv_t;
    cur = step.state;
  }
  return g;
}

double SimPolicy::sibling_divergence(int state, int cost) const {
  const LatentState& s = states_.at(static_cast<std::size_t>(state));
  if (s.n_children < 2) return 0.0;
  const Eigen::VectorXd probs = action_probabilities(state, 1.0);
  std::vector<double> v(static_cast<std::size_t>(s.n_children));
  for (int i = 0; i < s.n_children; ++i) {
    const int c = cost + edge_cost_[static_cast<std::size_t>(s.first_child + i)];
    v[static_cast<std::size_t>(i)] =
        success_probability_from(child_state_[static_cast<std::size_t>(s.first_child + i)], c, 1.0);
  }
  double num = 0.0, den = 0.0;
  for (int i = 0; i < s.n_children; ++i)
    for (int j = 0; j < s.n_children; ++j) {
      if (i == j) continue;
      const double w = probs[i] * probs[j];
      const double vi = v[static_cast<std::size_t>(i)], vj = v[static_cast<std::size_t>(j)];
      num += w * std::abs(vi - vj);
      den += w;
    }
  return den > 0.0 ? num / den : 0.0;
}

Trajectory sample_trajectory(const SimPolicy& policy, const StartPoint& start, double temperature, CounterRng& rng) {
  return policy.sample(start, temperature, rng);
}

Eigen::VectorXd score_gradient(const SimPolicy& policy, const Trajectory& traj) {
  return policy.score_gradient(traj);
}

// ---------------------------------------------------------------------------

double exact_collapse(double p, int budget) {
  if (p < 0.0 || p > 1.0) throw DomainError("p must lie in [0, 1]");
  if (budget < 1) throw DomainError("budget must be at least 1");
  return std::pow(p, budget) + std::pow(1.0 - p, budget);
}

CollapseBounds collapse_bounds(double p, int budget) {
  if (p < 0.0 || p > 1.0) throw DomainError("p must lie in [0, 1]");
  if (budget < 1) throw DomainError("budget must be at least 1");
  return {std::pow(std::max(p, 1.0 - p), budget), budget * std::min(p, 1.0 - p)};
}

CollapseEstimate monte_carlo_collapse(double p, int budget, long trials, std::uint64_t seed) {
  if (trials < 1) throw DomainError("need at least one trial");
  CollapseEstimate est;
  est.p = p;
  est.budget = budget;
  est.trials = trials;
  est.exact_rate = exact_collapse(p, budget);
  est.binomial_sigma = std::sqrt(est.exact_rate * (1.0 - est.exact_rate) / static_cast<double>(trials));

  std::uint64_t pbits = 0;
  static_assert(sizeof(pbits) == sizeof(p));
  std::memcpy(&pbits, &p, sizeof(p));
  CounterRng rng(seed, 0x434F4C4CULL, pbits, static_cast<std::uint64_t>(budget));
  long collapsed = 0;
  for (long t = 0; t < trials; ++t) {
    const bool first = rng.bernoulli(p);
    bool agree = true;
    for (int b = 1; b < budget; ++b)
      if (rng.bernoulli(p) != first) {
        agree = false;
        break;
      }
    collapsed += agree ? 1 : 0;
  }
  est.empirical_rate = static_cast<double>(collapsed) / static_cast<double>(trials);
  return est;
}

// ---------------------------------------------------------------------------

PromptSpec corpus_prompt(const CorpusSpec& corpus, int i) {
  CounterRng rng(corpus.seed, 0x434F5250ULL, static_cast<std::uint64_t>(i), 0);
  PromptSpec spec = corpus.base;
  spec.seed = hash_words({corpus.seed, static_cast<std::uint64_t>(i), 0x50524F4DULL});
  switch (corpus.difficulty) {
    case DifficultyProfile::fixed:
      spec.p = corpus.fixed_p;
      break;
    case DifficultyProfile::uniform:
      spec.p = rng.uniform();
      break;
    case DifficultyProfile::heavy_tail: {
      const bool easy = rng.uniform() < corpus.easy_fraction;
      const double tail = corpus.tail_scale * std::pow(rng.uniform(), corpus.tail_exponent);
      spec.p = easy ? 1.0 - tail : tail;
      break;
    }
  }
  if (!corpus.coupling) spec.coupling = 0.0;
  spec.rescuable = rng.uniform() < corpus.rescuable_fraction;
  spec.rescue_uplift = corpus.rescue_uplift;
  spec.embedding_signal = corpus.embedding_signal;

  PromptSpec probe = spec;
  probe.p = 0.0;
  const double reachable = SimPolicy::build(probe).uncapped_mass();
  spec.p = std::min(spec.p, reachable * (1.0 - 1e-9));
  return spec;
}

std::vector<SimPolicy> make_corpus(const CorpusSpec& corpus) {
  std::vector<SimPolicy> out;
  out.reserve(static_cast<std::size_t>(corpus.n_prompts));
  for (int i = 0; i < corpus.n_prompts; ++i) out.push_back(SimPolicy::build(corpus_prompt(corpus, i)));
  return out;
}

}  // namespace rollout
