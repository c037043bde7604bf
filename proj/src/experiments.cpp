#include "rollout/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <thread>

#include "rollout/credit.hpp"
#include "rollout/errors.hpp"
#include "rollout/uucb.hpp"

namespace rollout {

std::string Table::to_csv(const std::string& config_hash) const {
  std::string out = "# config_hash=" + config_hash + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(long v) { return std::to_string(v); }

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(n, 1));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n && !failed; i = next++) {
        try {
          f(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<SimPolicy> build_corpus(const CorpusSpec& spec, int threads) {
  std::vector<std::optional<SimPolicy>> slots(static_cast<std::size_t>(spec.n_prompts));
  parallel_for(spec.n_prompts, threads,
               [&](int i) { slots[static_cast<std::size_t>(i)] = SimPolicy::build(corpus_prompt(spec, i)); });
  std::vector<SimPolicy> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CollapseEstimate> run_collapse_curve(const CollapseCurveParams& p) {
  std::vector<CollapseEstimate> out(p.ps.size() * p.budgets.size());
  parallel_for(static_cast<int>(out.size()), p.threads, [&](int i) {
    const std::size_t pi = static_cast<std::size_t>(i) / p.budgets.size();
    const std::size_t bi = static_cast<std::size_t>(i) % p.budgets.size();
    out[static_cast<std::size_t>(i)] = monte_carlo_collapse(p.ps[pi], p.budgets[bi], p.trials, p.seed);
  });
  return out;
}

Table collapse_curve_table(const std::vector<CollapseEstimate>& rows) {
  Table t;
  t.columns = {"p", "B", "empirical", "exact", "lower_bound", "union_ceiling", "z"};
  for (const auto& r : rows) {
    const CollapseBounds b = collapse_bounds(r.p, r.budget);
    t.add({fmt(r.p), fmt(r.budget), fmt(r.empirical_rate), fmt(r.exact_rate), fmt(b.lower),
           fmt(b.union_upper_noncollapse), fmt(r.z_score())});
  }
  return t;
}

// ---------------------------------------------------------------------------

ExpansionModel oracle_instance(const OracleParams& p, int i) {
  const SimPolicy policy = SimPolicy::build(corpus_prompt(p.corpus, i));
  BuildConfig bc = p.build;
  bc.seed = p.seed + static_cast<std::uint64_t>(i);
  ExpansionModel m{initial_tree(policy, bc), {}, {}};
  std::vector<NodeId> frontier = expandable_frontier(m.base, bc.limits.depth_cap);
  if (static_cast<int>(frontier.size()) > p.max_candidates) {
    CounterRng rng(p.seed, 0x4F52434CULL, static_cast<std::uint64_t>(i), 0);
    for (std::size_t k = frontier.size() - 1; k > 0; --k) std::swap(frontier[k], frontier[rng.below(k + 1)]);
    frontier.resize(static_cast<std::size_t>(p.max_candidates));
    std::sort(frontier.begin(), frontier.end());
  }
  m.candidates = frontier;
  for (NodeId id : frontier) {
    std::vector<Trajectory> draws;
    for (int k = 0; k < p.per_node; ++k) {
      CounterRng rng = policy_stream(bc.seed, policy, 1, index(id), static_cast<std::uint64_t>(k));
      draws.push_back(policy.sample(StartPoint::of(m.base.node(id)), 1.0, rng));
    }
    m.rollouts.push_back(std::move(draws));
  }
  return m;
}

std::vector<OracleRow> run_oracle_compare(const OracleParams& p) {
  std::vector<OracleRow> rows(static_cast<std::size_t>(p.instances));
  parallel_for(p.instances, p.threads, [&](int i) {
    const ScheduleProblem prob(oracle_instance(p, i), p.weights);
    const int n = prob.size();
    OracleRow r;
    r.instance = i;
    r.candidates = n;
    r.f_empty = prob.value(0);
    const SetFunction f = [&](std::uint32_t m) { return prob.value(m) - r.f_empty; };
    const auto greedy = greedy_schedule(f, n, p.budget);
    const auto opt = brute_force_schedule(f, n, p.budget);
    r.f_greedy = f(mask_of(greedy));
    r.f_opt = opt.value;
    r.ratio = r.f_opt > 0.0 ? r.f_greedy / r.f_opt : (r.f_greedy >= r.f_opt - 1e-12 ? 1.0 : 0.0);
    const auto full = check_set_function(f, n);
    r.submodular = full.submodular;
    r.monotone = full.monotone;
    r.coverage_submodular = check_set_function([&](std::uint32_t m) { return prob.terms(m).coverage; }, n).submodular;
    const auto con = check_set_function([&](std::uint32_t m) { return double(prob.terms(m).contrast); }, n);
    r.contrast_submodular = con.submodular;
    r.contrast_monotone = con.monotone;
    r.novelty_monotone = check_set_function([&](std::uint32_t m) { return prob.terms(m).novelty; }, n).monotone;
    rows[static_cast<std::size_t>(i)] = r;
  });
  return rows;
}

Table oracle_table(const std::vector<OracleRow>& rows) {
  Table t;
  t.columns = {"instance_id", "candidates", "F_greedy", "F_opt", "ratio", "submodular_check_passed", "monotone",
               "coverage_submodular", "contrast_submodular", "contrast_monotone", "novelty_monotone"};
  for (const auto& r : rows)
    t.add({fmt(r.instance), fmt(r.candidates), fmt(r.f_greedy), fmt(r.f_opt), fmt(r.ratio), fmt(r.submodular),
           fmt(r.monotone), fmt(r.coverage_submodular), fmt(r.contrast_submodular), fmt(r.contrast_monotone),
           fmt(r.novelty_monotone)});
  return t;
}

DiminishingResult run_diminishing_returns(const DiminishingParams& p) {
  const int per_instance = 20;
  const int n_inst = (p.pairs + per_instance - 1) / per_instance;
  std::vector<std::vector<std::pair<double, double>>> parts(static_cast<std::size_t>(n_inst));
  parallel_for(n_inst, p.problems.threads, [&](int i) {
    const ScheduleProblem prob(oracle_instance(p.problems, i), p.problems.weights);
    const int n = prob.size();
    if (n < 2) return;
    CounterRng rng(p.problems.seed, 0x44494D52ULL, static_cast<std::uint64_t>(i), 0);
    for (int j = 0; j < per_instance && i * per_instance + j < p.pairs; ++j) {
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t k = order.size() - 1; k > 0; --k) std::swap(order[k], order[rng.below(k + 1)]);
      const int size = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      const std::uint32_t mask = mask_of(std::span<const int>(order.data(), static_cast<std::size_t>(size)));
      const int v = order[static_cast<std::size_t>(size)];
      parts[static_cast<std::size_t>(i)].push_back({static_cast<double>(size), prob.marginal_gain(mask, v)});
    }
  });
  DiminishingResult r;
  for (const auto& part : parts)
    for (const auto& [s, g] : part) {
      r.set_sizes.push_back(s);
      r.gains.push_back(g);
    }
  r.test = stats::spearman_permutation_test(r.set_sizes, r.gains, p.permutations, p.problems.seed, -1);
  return r;
}

// ---------------------------------------------------------------------------

double improved_success(const SimPolicy& policy, const RolloutTree& tree, const ImprovementParams& p) {
  const auto recs = tree_advantages(tree, p.lambda, p.alpha);
  std::vector<Trajectory> group;
  std::vector<double> adv;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    Trajectory t = rooted_trajectory(tree, tree.leaves()[i]);
    t.policy_id = policy.id();
    group.push_back(std::move(t));
    adv.push_back(recs[i].a_total);
  }
  const Eigen::VectorXd g = weighted_score_sum(policy, group, adv);
  const Eigen::VectorXd theta = policy.parameters() + p.step * g / static_cast<double>(group.size());
  return policy.with_parameters(theta).success_probability(1.0);
}

PromptMetrics prompt_metrics(const SimPolicy& policy, const RolloutTree& tree, const ImprovementParams& p) {
  PromptMetrics m;
  m.mixed = outcome_counts(tree).mixed();
  m.leaves = static_cast<int>(tree.leaves().size());
  for (NodeId l : tree.leaves()) {
    m.mean_depth += tree.node(l).depth;
    m.mean_tool_calls += tree.node(l).path_cost;
  }
  m.mean_depth /= m.leaves;
  m.mean_tool_calls /= m.leaves;
  m.reward = improved_success(policy, tree, p);
  return m;
}

namespace {

std::vector<PromptMetrics> corpus_metrics(const std::vector<SimPolicy>& corpus, const BuildConfig& build,
                                          std::uint64_t seed, const ImprovementParams& imp, int threads) {
  std::vector<PromptMetrics> out(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), threads, [&](int i) {
    BuildConfig bc = build;
    bc.seed = seed + static_cast<std::uint64_t>(i);
    const auto res = build_tree(corpus[static_cast<std::size_t>(i)], bc);
    out[static_cast<std::size_t>(i)] = prompt_metrics(corpus[static_cast<std::size_t>(i)], res.tree, imp);
  });
  return out;
}

PairedEffect paired(const std::string& name, const std::vector<PromptMetrics>& off, const std::vector<PromptMetrics>& on,
                    double PromptMetrics::*field) {
  std::vector<double> d(off.size());
  for (std::size_t i = 0; i < off.size(); ++i) d[i] = off[i].*field - on[i].*field;
  return {name, stats::normal_mean_ci(d)};
}

}  // namespace

EliminationResult run_elimination_matrix(const EliminationParams& p, const std::vector<SimPolicy>& corpus) {
  EliminationResult r;
  const bool toggles[8][3] = {{true, true, true},   {false, true, true}, {true, false, true}, {true, true, false},
                              {false, false, true}, {false, true, false}, {true, false, false}, {false, false, false}};
  for (const auto& t : toggles) {
    BuildConfig bc = p.build;
    if (!t[0]) bc.coeffs.lambda_h = 0.0;
    if (!t[1]) bc.coeffs.lambda_c = 0.0;
    if (!t[2]) bc.coeffs.lambda_d = 0.0;
    EliminationRow row;
    row.entropy_on = t[0];
    row.cost_on = t[1];
    row.depth_on = t[2];
    row.per_prompt = corpus_metrics(corpus, bc, p.seed, p.improvement, p.threads);
    for (const auto& m : row.per_prompt) {
      row.mixed_ratio += m.mixed;
      row.mean_depth += m.mean_depth;
      row.mean_tool_calls += m.mean_tool_calls;
      row.reward += m.reward;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, row.per_prompt.size()));
    row.mixed_ratio /= n;
    row.mean_depth /= n;
    row.mean_tool_calls /= n;
    row.reward /= n;
    r.rows.push_back(std::move(row));
  }
  // Per-prompt mixed flag as a double for the paired interval.
  std::vector<PromptMetrics> on = r.rows[0].per_prompt, h_off = r.rows[1].per_prompt;
  std::vector<double> dm(on.size());
  for (std::size_t i = 0; i < on.size(); ++i) dm[i] = double(h_off[i].mixed) - double(on[i].mixed);
  r.entropy_off_mixed = {"mixed(entropy off) - mixed(all on)", stats::normal_mean_ci(dm)};
  r.cost_off_tool_calls = paired("tool_calls(cost off) - tool_calls(all on)", r.rows[2].per_prompt, on,
                                 &PromptMetrics::mean_tool_calls);
  r.depth_off_depth =
      paired("depth(depth off) - depth(all on)", r.rows[3].per_prompt, on, &PromptMetrics::mean_depth);
  return r;
}

Table elimination_table(const EliminationResult& r) {
  Table t;
  t.columns = {"lambda_H", "lambda_C", "lambda_D", "mixed_ratio", "mean_depth", "mean_tool_calls", "sim_reward"};
  for (const auto& row : r.rows)
    t.add({row.entropy_on ? "on" : "off", row.cost_on ? "on" : "off", row.depth_on ? "on" : "off",
           fmt(row.mixed_ratio), fmt(row.mean_depth), fmt(row.mean_tool_calls), fmt(row.reward)});
  return t;
}

std::vector<SweepCell> run_lambda_alpha_sweep(const SweepParams& p, const std::vector<SimPolicy>& corpus) {
  // Trees do not depend on (lambda, alpha); build once.
  std::vector<std::optional<RolloutTree>> trees(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), p.threads, [&](int i) {
    BuildConfig bc = p.build;
    bc.seed = p.build.seed + static_cast<std::uint64_t>(i);
    trees[static_cast<std::size_t>(i)] = build_tree(corpus[static_cast<std::size_t>(i)], bc).tree;
  });
  std::vector<SweepCell> cells;
  for (double lambda : p.lambdas)
    for (double alpha : p.alphas) cells.push_back({lambda, alpha, 0.0});
  for (SweepCell& c : cells) {
    std::vector<double> per(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), p.threads, [&](int i) {
      per[static_cast<std::size_t>(i)] = improved_success(corpus[static_cast<std::size_t>(i)],
                                                          *trees[static_cast<std::size_t>(i)],
                                                          {c.lambda, c.alpha, p.step});
    });
    c.reward = std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
  }
  return cells;
}

Table sweep_table(const std::vector<SweepCell>& cells) {
  Table t;
  t.columns = {"lambda", "alpha", "sim_reward"};
  for (const auto& c : cells) t.add({fmt(c.lambda), fmt(c.alpha), fmt(c.reward)});
  return t;
}

GridResult run_grid_sweep(const GridParams& p, const std::vector<SimPolicy>& corpus) {
  GridResult r;
  for (double h : p.lambda_h)
    for (double c : p.lambda_c)
      for (double d : p.lambda_d) {
        GridCell cell{h, c, d, 0.0, 0.0, false};
        std::vector<double> seed_means;
        for (int s = 0; s < p.seeds; ++s) {
          BuildConfig bc = p.build;
          bc.coeffs.lambda_h = h;
          bc.coeffs.lambda_c = c;
          bc.coeffs.lambda_d = d;
          const auto m = corpus_metrics(corpus, bc, p.build.seed + 1'000'003ULL * static_cast<std::uint64_t>(s),
                                        p.improvement, p.threads);
          double sum = 0.0;
          for (const auto& x : m) sum += x.reward;
          seed_means.push_back(sum / static_cast<double>(std::max<std::size_t>(1, m.size())));
        }
        cell.reward = stats::mean(seed_means);
        cell.seed_std = std::sqrt(stats::population_variance(seed_means));
        r.cells.push_back(cell);
      }
  r.best = -INFINITY;
  for (const auto& c : r.cells) r.best = std::max(r.best, c.reward);
  int in = 0;
  for (auto& c : r.cells) {
    c.in_plateau = c.reward >= r.best - p.band;
    in += c.in_plateau;
  }
  r.plateau_fraction = r.cells.empty() ? 0.0 : static_cast<double>(in) / static_cast<double>(r.cells.size());
  return r;
}

Table grid_table(const GridResult& r) {
  Table t;
  t.columns = {"lambda_H", "lambda_C", "lambda_D", "sim_reward", "seed_std", "in_plateau"};
  for (const auto& c : r.cells)
    t.add({fmt(c.lambda_h), fmt(c.lambda_c), fmt(c.lambda_d), fmt(c.reward), fmt(c.seed_std), fmt(c.in_plateau)});
  return t;
}

// ---------------------------------------------------------------------------

AbaDataset make_aba_dataset(const std::vector<SimPolicy>& corpus, const BuildConfig& build, int threads) {
  BuildConfig bc = build;
  bc.allocator.reset();
  std::vector<std::optional<RescueExample>> slots(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), threads, [&](int i) {
    BuildConfig local = bc;
    local.seed = bc.seed + static_cast<std::uint64_t>(i);
    const auto res = build_tree(corpus[static_cast<std::size_t>(i)], local);
    if (outcome_counts(res.tree).uniform())
      slots[static_cast<std::size_t>(i)] =
          label_tree(res.tree, corpus[static_cast<std::size_t>(i)], local.seed, bc.rescue_temperature);
  });
  AbaDataset d;
  d.prompts = static_cast<int>(corpus.size());
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i]) {
      d.examples.push_back(std::move(*slots[i]));
      d.prompt_index.push_back(static_cast<int>(i));
    }
  return d;
}

AbaEvaluation evaluate_allocator(const AllocatorModel& model, const std::vector<SimPolicy>& corpus,
                                 const std::vector<int>& prompts, const BuildConfig& build, int bootstrap,
                                 int threads) {
  struct Pair {
    bool mixed_without = false, mixed_with = false, uniform = false, triggered = false;
    int leaves_without = 0, leaves_with = 0;
  };
  auto shared = std::make_shared<const AllocatorModel>(model);
  std::vector<Pair> pairs(prompts.size());
  parallel_for(static_cast<int>(prompts.size()), threads, [&](int k) {
    const int i = prompts[static_cast<std::size_t>(k)];
    BuildConfig bc = build;
    bc.seed = build.seed + static_cast<std::uint64_t>(i);
    bc.allocator.reset();
    const auto without = build_tree(corpus[static_cast<std::size_t>(i)], bc);
    bc.allocator = shared;
    const auto with = build_tree(corpus[static_cast<std::size_t>(i)], bc);
    Pair& p = pairs[static_cast<std::size_t>(k)];
    p.mixed_without = outcome_counts(without.tree).mixed();
    p.mixed_with = outcome_counts(with.tree).mixed();
    p.uniform = !p.mixed_without;
    p.triggered = with.log.rescue.triggered;
    p.leaves_without = static_cast<int>(without.tree.leaves().size());
    p.leaves_with = static_cast<int>(with.tree.leaves().size());
  });

  AbaEvaluation e;
  e.model = model;
  e.eval_prompts = static_cast<int>(pairs.size());
  if (pairs.empty()) return e;
  int uniform = 0, hits = 0;
  double leaves_with = 0, leaves_without = 0;
  std::vector<double> diff;
  for (const Pair& p : pairs) {
    e.mixed_ratio_with += p.mixed_with;
    e.mixed_ratio_without += p.mixed_without;
    uniform += p.uniform;
    e.triggers += p.triggered;
    hits += p.triggered && p.mixed_with;
    leaves_with += p.leaves_with;
    leaves_without += p.leaves_without;
    diff.push_back(double(p.mixed_with) - double(p.mixed_without));
  }
  const double n = static_cast<double>(pairs.size());
  e.mixed_ratio_with /= n;
  e.mixed_ratio_without /= n;
  e.collapse_rate_with = 1.0 - e.mixed_ratio_with;
  e.collapse_rate_without = 1.0 - e.mixed_ratio_without;
  e.trigger_rate = e.triggers / n;
  e.trigger_rate_uniform = uniform > 0 ? static_cast<double>(e.triggers) / uniform : 0.0;
  e.hit_at_1 = e.triggers > 0 ? static_cast<double>(hits) / e.triggers : 0.0;
  e.leaf_inflation = (leaves_with - leaves_without) / n;
  e.lift = stats::bootstrap_mean_ci(diff, bootstrap, 0.95, 0xB0057ULL);
  return e;
}

AbaEvaluation run_aba_experiment(const AbaParams& p, const std::vector<SimPolicy>& corpus) {
  const AbaDataset data = make_aba_dataset(corpus, p.build, p.threads);
  const int cut = static_cast<int>(std::lround(p.train_fraction * static_cast<double>(corpus.size())));
  std::vector<RescueExample> train, test;
  for (std::size_t k = 0; k < data.examples.size(); ++k)
    (data.prompt_index[k] < cut ? train : test).push_back(data.examples[k]);

  const AllocatorModel model = train_allocator(train, p.hyper);
  const Eigen::MatrixXd xt = feature_matrix(test);
  const auto yt = label_vector(test);
  std::vector<double> scores(static_cast<std::size_t>(xt.rows()));
  for (Eigen::Index i = 0; i < xt.rows(); ++i) scores[static_cast<std::size_t>(i)] = model.predict(xt.row(i).transpose());

  std::vector<int> eval_prompts;
  for (int i = cut; i < static_cast<int>(corpus.size()); ++i) eval_prompts.push_back(i);
  AbaEvaluation e = evaluate_allocator(model, corpus, eval_prompts, p.build, p.bootstrap, p.threads);
  e.roc_auc = stats::roc_auc_trapezoid(scores, yt);
  e.roc_auc_mann_whitney = stats::roc_auc_mann_whitney(scores, yt);

  const Eigen::MatrixXd xtr = feature_matrix(train);
  const auto ytr = label_vector(train);
  int correct = 0;
  for (Eigen::Index i = 0; i < xtr.rows(); ++i)
    correct += (model.predict(xtr.row(i).transpose()) > model.threshold) == (ytr[static_cast<std::size_t>(i)] == 1);
  e.train_accuracy = static_cast<double>(correct) / static_cast<double>(std::max<Eigen::Index>(1, xtr.rows()));

  // Label-shuffle control, averaged over independent permutations.
  std::vector<double> control_aucs(static_cast<std::size_t>(std::max(1, p.shuffles)));
  parallel_for(static_cast<int>(control_aucs.size()), p.threads, [&](int s) {
    std::vector<int> shuffled = ytr;
    CounterRng rng(p.shuffle_seed, 0x53485546ULL, static_cast<std::uint64_t>(s), 0);
    for (std::size_t k = shuffled.size(); k-- > 1;) std::swap(shuffled[k], shuffled[rng.below(k + 1)]);
    const AllocatorModel control = train_allocator(xtr, shuffled, p.hyper);
    std::vector<double> cscores(static_cast<std::size_t>(xt.rows()));
    for (Eigen::Index i = 0; i < xt.rows(); ++i)
      cscores[static_cast<std::size_t>(i)] = control.predict(xt.row(i).transpose());
    control_aucs[static_cast<std::size_t>(s)] = stats::roc_auc_mann_whitney(cscores, yt);
  });
  e.shuffled_auc = stats::mean(control_aucs);
  return e;
}

Table aba_table(const AbaEvaluation& e) {
  Table t;
  t.columns = {"metric", "value"};
  t.add({"roc_auc", fmt(e.roc_auc)});
  t.add({"roc_auc_mann_whitney", fmt(e.roc_auc_mann_whitney)});
  t.add({"shuffled_auc", fmt(e.shuffled_auc)});
  t.add({"train_accuracy", fmt(e.train_accuracy)});
  t.add({"hit_at_1", fmt(e.hit_at_1)});
  t.add({"mixed_ratio_with", fmt(e.mixed_ratio_with)});
  t.add({"mixed_ratio_without", fmt(e.mixed_ratio_without)});
  t.add({"collapse_rate_with", fmt(e.collapse_rate_with)});
  t.add({"collapse_rate_without", fmt(e.collapse_rate_without)});
  t.add({"trigger_rate", fmt(e.trigger_rate)});
  t.add({"trigger_rate_uniform", fmt(e.trigger_rate_uniform)});
  t.add({"leaf_inflation", fmt(e.leaf_inflation)});
  t.add({"lift", fmt(e.lift.estimate)});
  t.add({"lift_ci_lower", fmt(e.lift.lower)});
  t.add({"lift_ci_upper", fmt(e.lift.upper)});
  t.add({"eval_prompts", fmt(e.eval_prompts)});
  t.add({"triggers", fmt(e.triggers)});
  return t;
}

// ---------------------------------------------------------------------------

std::function<void(RolloutTree&)> make_drift_injector(const SimPolicy& policy, std::uint64_t seed, int count) {
  auto counter = std::make_shared<std::uint64_t>(0);
  const SimPolicy* pol = &policy;
  return [pol, seed, count, counter](RolloutTree& tree) {
    for (int i = 0; i < count; ++i) {
      const auto frontier = expandable_frontier(tree, tree.limits().depth_cap);
      if (frontier.empty()) return;
      const std::uint64_t c = (*counter)++;
      CounterRng pick(seed, 0x44524654ULL, c, 0);
      const NodeId id = frontier[pick.below(frontier.size())];
      CounterRng rng(seed, 0x44524654ULL, c, 1);
      Trajectory t = pol->sample(StartPoint::of(tree.node(id)), 1.0, rng);
      tree.add_rollout(t);
    }
  };
}

std::vector<BenchRow> run_bench_speculative(const BenchParams& p) {
  CorpusSpec cs = p.corpus;
  cs.n_prompts = p.rounds;
  const auto corpus = build_corpus(cs, 1);
  std::vector<BenchRow> rows;
  for (int r = 0; r < p.rounds; ++r) {
    const SimPolicy& policy = corpus[static_cast<std::size_t>(r)];
    BuildConfig bc = p.build;
    bc.seed = p.build.seed + static_cast<std::uint64_t>(r);
    bc.n_select = p.n_select;
    bc.per_node = p.per_node;
    bc.budget = 1'000'000;
    bc.rollout_latency_us = 0;
    const RolloutTree base = initial_tree(policy, bc);
    const DepthStats stats = fit_depth_stats(base);

    RolloutTree seq = base;
    BuildConfig timed = bc;
    timed.rollout_latency_us = p.latency_us;
    const auto t0 = std::chrono::steady_clock::now();
    expand_round(seq, policy, stats, timed, 1);
    const double t_seq = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    RolloutTree spec = base;
    SpeculativeRoundConfig sc;
    sc.workers = p.workers;
    sc.staleness_bound = p.staleness;
    sc.n_select = p.n_select;
    sc.accept_rank = p.accept_rank;
    sc.per_node = p.per_node;
    sc.budget = bc.budget;
    sc.seed = bc.seed;
    sc.round = 1;
    sc.coeffs = bc.coeffs;
    sc.rollout_latency_us = p.latency_us;
    if (p.drift > 0) {
      sc.drift_after_snapshot = make_drift_injector(policy, bc.seed ^ 0xD1F7ULL, p.drift);
      sc.drift_before_reconcile = make_drift_injector(policy, bc.seed ^ 0xD2F7ULL, p.drift);
    }
    const auto sr = run_speculative_round(spec, policy, stats, sc);
    rows.push_back({r, sr.metrics.acceptance_rate, sr.metrics.rolled_back, t_seq, sr.metrics.seconds,
                    sr.metrics.q_drift});
  }
  return rows;
}

Table bench_table(const std::vector<BenchRow>& rows) {
  Table t;
  t.columns = {"round", "acceptance_rate", "rollbacks", "latency_sequential", "latency_speculative", "q_drift"};
  for (const auto& r : rows)
    t.add({fmt(r.round), fmt(r.acceptance_rate), fmt(r.rollbacks), fmt(r.latency_sequential),
           fmt(r.latency_speculative), fmt(r.q_drift)});
  return t;
}

// ---------------------------------------------------------------------------

RifbResult rifb_from_trees(const std::vector<RolloutTree>& trees, const std::vector<const SimPolicy*>& policies,
                           const RifbParams& p) {
  if (trees.size() != policies.size()) throw DomainError("one policy per tree");
  RifbResult r;
  r.samples.resize(trees.size());
  parallel_for(static_cast<int>(trees.size()), p.threads, [&](int i) {
    const RolloutTree& tree = trees[static_cast<std::size_t>(i)];
    std::vector<double> rewards;
    for (NodeId l : tree.leaves()) rewards.push_back(reward_of(tree.node(l).outcome));
    RifbSample s;
    s.group_id = i;
    s.sigma = std::sqrt(stats::population_variance(rewards));
    s.objective = objective_value(tree, p.weights);
    s.rifb = tree_gradient_mass(*policies[static_cast<std::size_t>(i)], tree, p.lambda, p.alpha);
    r.samples[static_cast<std::size_t>(i)] = s;
  });
  std::vector<double> f, g;
  for (const auto& s : r.samples) {
    f.push_back(s.objective);
    g.push_back(s.rifb);
  }
  if (f.size() >= 2) r.test = stats::spearman_permutation_test(f, g, p.permutations, p.seed, 1);
  return r;
}

RifbResult run_rifb(const RifbParams& p, const std::vector<SimPolicy>& corpus) {
  std::vector<std::optional<RolloutTree>> slots(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), p.threads, [&](int i) {
    BuildConfig bc = p.build;
    bc.seed = p.build.seed + static_cast<std::uint64_t>(i);
    slots[static_cast<std::size_t>(i)] = build_tree(corpus[static_cast<std::size_t>(i)], bc).tree;
  });
  std::vector<RolloutTree> trees;
  std::vector<const SimPolicy*> pols;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    trees.push_back(std::move(*slots[i]));
    pols.push_back(&corpus[i]);
  }
  return rifb_from_trees(trees, pols, p);
}

Table rifb_table(const RifbResult& r) {
  Table t;
  t.columns = {"group_id", "sigma", "F", "rifb"};
  for (const auto& s : r.samples) t.add({fmt(s.group_id), fmt(s.sigma), fmt(s.objective), fmt(s.rifb)});
  if (r.test)
    t.add({"summary_spearman", fmt(r.test->statistic), "p_value", fmt(r.test->p_value)});
  else
    t.add({"summary_spearman", "undefined", "p_value", "undefined"});
  return t;
}

// ---------------------------------------------------------------------------

std::vector<TrajectoryRow> run_collapse_trajectory(const TrajectoryParams& p, const std::vector<SimPolicy>& corpus,
                                                   const AllocatorModel& model) {
  auto shared = std::make_shared<const AllocatorModel>(model);
  std::vector<TrajectoryRow> rows;
  for (int step = 0; step <= p.steps; ++step) {
    struct Cell {
      double exact = 0;
      bool flat = false, tree = false, tree_aba = false;
    };
    std::vector<Cell> cells(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), p.threads, [&](int i) {
      const SimPolicy& base = corpus[static_cast<std::size_t>(i)];
      const double p0 = std::clamp(base.spec().p, 1e-6, 1.0 - 1e-6);
      const double z = std::log(p0 / (1.0 - p0)) * (1.0 + p.drift_rate * step);
      const double target = std::min(1.0 / (1.0 + std::exp(-z)), base.uncapped_mass() * (1.0 - 1e-9));
      const SimPolicy pol = base.recalibrated(target);
      Cell& c = cells[static_cast<std::size_t>(i)];
      c.exact = exact_collapse(target, p.flat_budget);
      const std::uint64_t seed = p.seed + 1'000'003ULL * static_cast<std::uint64_t>(step) + static_cast<std::uint64_t>(i);
      int succ = 0;
      for (int k = 0; k < p.flat_budget; ++k) {
        CounterRng rng = policy_stream(seed, pol, 0x464C4154ULL, 0, static_cast<std::uint64_t>(k));
        succ += pol.sample(StartPoint{}, 1.0, rng).reward > 0;
      }
      c.flat = succ == 0 || succ == p.flat_budget;
      BuildConfig bc = p.build;
      bc.seed = seed;
      bc.allocator.reset();
      c.tree = outcome_counts(build_tree(pol, bc).tree).uniform();
      bc.allocator = shared;
      c.tree_aba = outcome_counts(build_tree(pol, bc).tree).uniform();
    });
    TrajectoryRow row;
    row.step = step;
    for (const Cell& c : cells) {
      row.flat_exact += c.exact;
      row.flat_empirical += c.flat;
      row.tree += c.tree;
      row.tree_aba += c.tree_aba;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, cells.size()));
    row.flat_exact /= n;
    row.flat_empirical /= n;
    row.tree /= n;
    row.tree_aba /= n;
    rows.push_back(row);
  }
  return rows;
}

Table trajectory_table(const std::vector<TrajectoryRow>& rows) {
  Table t;
  t.columns = {"step", "flat_exact", "flat_empirical", "tree", "tree_aba"};
  for (const auto& r : rows)
    t.add({fmt(r.step * 10), fmt(r.flat_exact), fmt(r.flat_empirical), fmt(r.tree), fmt(r.tree_aba)});
  return t;
}

}  // namespace rollout
