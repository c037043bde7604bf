// Acceptance run: one PASS/FAIL line per criterion, with the measured values.
// Exits non-zero only if something throws; a FAIL line is a result, not a crash.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>

#include "rollout/allocator.hpp"
#include "rollout/builder.hpp"
#include "rollout/config.hpp"
#include "rollout/credit.hpp"
#include "rollout/experiments.hpp"
#include "rollout/objective.hpp"
#include "rollout/speculative.hpp"
#include "rollout/tree_io.hpp"
#include "rollout/uucb.hpp"

using namespace rollout;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << detail << std::endl;
  failures += !pass;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string f(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(ROLLOUT_FIXTURES) + "/" + name);
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void collapse_law() {
  const auto t0 = Clock::now();
  CollapseCurveParams p;
  const auto rows = run_collapse_curve(p);
  double worst = 0;
  double spot = -1;
  for (const auto& r : rows) {
    worst = std::max(worst, std::abs(r.z_score()));
    if (r.p == 0.01 && r.budget == 16) spot = r.empirical_rate;
  }
  const double secs = seconds_since(t0);
  const bool ok = worst <= 3.0 && std::abs(spot - 0.8515) <= 0.004 && secs < 120;
  report(1, "collapse law", ok,
         "max |z| " + f(worst) + " over " + std::to_string(rows.size()) + " cells, (0.01,16) -> " + f(spot) + ", " +
             f(secs, 3) + " s");
}

void bound_sandwich() {
  const auto t0 = Clock::now();
  const CollapseCurveParams grid;
  int bad = 0;
  for (double p : grid.ps)
    for (int b : grid.budgets) {
      const double exact = exact_collapse(p, b);
      const CollapseBounds bounds = collapse_bounds(p, b);
      bad += !(bounds.lower <= exact && exact <= 1.0 && 1.0 - exact <= bounds.union_upper_noncollapse);
    }
  const double secs = seconds_since(t0);
  report(2, "bound sandwich", bad == 0 && secs < 1.0, std::to_string(bad) + " violations, " + f(secs, 3) + " s");
}

void greedy_ratio() {
  const auto t0 = Clock::now();
  const OracleParams p;
  const auto rows = run_oracle_compare(p);
  int gated = 0, below = 0, coverage_viol = 0;
  double min_ratio = 1.0, sum_ratio = 0;
  std::vector<double> ratios;
  for (const auto& r : rows) {
    coverage_viol += !r.coverage_submodular;
    if (!r.submodular) continue;
    ++gated;
    ratios.push_back(r.ratio);
    min_ratio = std::min(min_ratio, r.ratio);
    sum_ratio += r.ratio;
    below += r.ratio < 1.0 - 1.0 / std::exp(1.0) - 1e-9;
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios.empty() ? 0.0 : ratios[ratios.size() / 2];
  const double secs = seconds_since(t0);
  report(3, "greedy near-optimality", gated > 0 && below == 0 && secs < 300,
         std::to_string(gated) + "/" + std::to_string(rows.size()) + " instances pass the submodularity check, " +
             std::to_string(below) + " below 1-1/e; ratio min " + f(min_ratio) + " median " + f(median) + " mean " +
             f(gated ? sum_ratio / gated : 0.0) + "; coverage violation rate " +
             f(static_cast<double>(coverage_viol) / rows.size()) + ", " + f(secs, 3) + " s");
}

void diminishing_returns() {
  const DiminishingParams p;
  const auto r = run_diminishing_returns(p);
  const bool ok = r.test && r.test->statistic < 0 && r.test->p_value < 0.01;
  report(4, "diminishing returns", ok,
         std::to_string(r.gains.size()) + " pairs, Spearman " + (r.test ? f(r.test->statistic) : "undefined") +
             ", permutation p " + (r.test ? f(r.test->p_value) : "undefined"));
}

void golden_suite() {
  const auto t0 = Clock::now();
  const nlohmann::json g = nlohmann::json::parse(slurp("worked_example.json"));
  std::map<std::string, TreeRecord> trees;
  {
    std::istringstream in(slurp("worked_example_trees.jsonl"));
    for (auto& r : read_tree_corpus(in)) trees.emplace(r.header.prompt_id, std::move(r));
  }
  const double tol = g["tolerance"].get<double>();
  std::vector<std::string> misses;
  auto near = [&](const std::string& what, double got, double want) {
    if (!(std::abs(got - want) < tol)) misses.push_back(what + " " + f(got) + " vs " + f(want));
  };

  const RolloutTree& initial = trees.at("initial").tree;
  const auto frontier = expandable_frontier(initial, 6);
  if (frontier.size() != g["frontier_size"].get<std::size_t>())
    misses.push_back("frontier " + std::to_string(frontier.size()));

  const auto& sc = g["score_coefficients"];
  const UucbCoefficients coeffs{sc["c"], sc["lambda_h"], sc["lambda_c"], sc["lambda_d"]};
  const ScoreScale scale{g["score_scale"]["tool_cap"], g["score_scale"]["depth_cap"]};
  DepthStats stats;
  stats.mean = g["depth_stats"]["mean"].get<std::vector<double>>();
  stats.stddev = g["depth_stats"]["stddev"].get<std::vector<double>>();
  stats.count = g["depth_stats"]["count"].get<std::vector<int>>();
  std::string totals;
  for (const auto& c : g["score_cases"]) {
    const ScoreInputs in{c["q_mean"], c["visits"], c["parent_visits"], c["entropy"], c["depth"], c["path_cost"]};
    const double total = uucb_score(in, coeffs, stats, scale).total;
    near("uucb " + c["name"].get<std::string>(), total, c["total"]);
    totals += (totals.empty() ? "" : ", ") + f(total, 3);
  }

  const TreeRecord& alloc = trees.at("allocator");
  Eigen::VectorXd emb(static_cast<Eigen::Index>(alloc.header.embedding.size()));
  for (std::size_t i = 0; i < alloc.header.embedding.size(); ++i)
    emb[static_cast<Eigen::Index>(i)] = alloc.header.embedding[i];
  const AllocatorFeatures feats = extract_features(emb, alloc.tree);
  const auto& want = g["allocator_features"];
  near("n_success", feats.n_success, want[0]);
  near("n_fail", feats.n_fail, want[1]);
  near("mean entropy", feats.mean_entropy, want[2]);

  const RolloutTree& credit = trees.at("credit").tree;
  const auto& c = g["credit"];
  const NodeId node = to_node_id(c["node"].get<std::size_t>());
  const NodeId leaf = to_node_id(c["leaf"].get<std::size_t>());
  const double sib = sibling_advantage(credit, node);
  const double hier = hierarchical_advantage(credit, leaf, c["alpha"]);
  const auto all = tree_advantages(credit, c["lambda"], c["alpha"]);
  std::size_t pos = 0;
  while (credit.leaves()[pos] != leaf) ++pos;
  near("sibling", sib, c["sibling_advantage"]);
  near("hierarchical", hier, c["hierarchical"]);
  near("total", all[pos].a_total, c["total"]);

  const double secs = seconds_since(t0);
  std::string detail = "frontier " + std::to_string(frontier.size()) + ", uucb totals (" + totals + "), features (" +
                       std::to_string(feats.n_success) + ", " + std::to_string(feats.n_fail) + ", " +
                       f(feats.mean_entropy, 3) + "), sibling " + f(sib, 3) + ", hierarchical " + f(hier, 3) +
                       ", total " + f(all[pos].a_total, 3) + ", " + f(secs, 3) + " s";
  for (const auto& m : misses) detail += "; miss: " + m;
  report(5, "worked example", misses.empty() && secs < 1.0, detail);
}

void zero_gradient() {
  CorpusSpec cs;
  cs.n_prompts = 400;
  cs.seed = 61;
  const auto corpus = build_corpus(cs);
  const int group = 16;
  long uniform = 0, mixed = 0, uniform_nonzero = 0, mixed_zero = 0;
  for (std::uint64_t g = 0; uniform < 10'000; ++g) {
    const SimPolicy& pol = corpus[g % corpus.size()];
    std::vector<Trajectory> trajs;
    std::vector<double> rewards;
    for (int k = 0; k < group; ++k) {
      CounterRng rng = policy_stream(g, pol, 0x524946ULL, 0, static_cast<std::uint64_t>(k));
      trajs.push_back(pol.sample({}, 1.0, rng));
      rewards.push_back(trajs.back().reward);
    }
    const auto adv = grpo_advantages(rewards);
    const double mass = gradient_mass(pol, trajs, adv);
    const bool is_uniform = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
    if (is_uniform) {
      ++uniform;
      uniform_nonzero += mass != 0.0;
    } else {
      ++mixed;
      mixed_zero += !(mass > 0.0);
    }
  }

  int fd_bad = 0;
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const SimPolicy& pol = corpus[static_cast<std::size_t>(t)];
    CounterRng rng(9000 + t);
    const Trajectory traj = pol.sample({}, t % 2 ? 1.0 : 1.2, rng);
    const Eigen::VectorXd grad = pol.score_gradient(traj);
    Eigen::VectorXd theta = pol.parameters();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double h = 1e-5, keep = theta[i];
      theta[i] = keep + h;
      const double up = pol.log_prob(traj, theta);
      theta[i] = keep - h;
      const double down = pol.log_prob(traj, theta);
      theta[i] = keep;
      const double fd = (up - down) / (2 * h);
      if (std::abs(grad[i]) < 1e-9) {
        fd_bad += std::abs(fd) >= 1e-8;
      } else {
        const double rel = std::abs(fd - grad[i]) / std::abs(grad[i]);
        worst = std::max(worst, rel);
        fd_bad += rel > 1e-5;
      }
    }
  }
  report(6, "collapse implies zero gradient", uniform_nonzero == 0 && mixed_zero == 0 && fd_bad == 0,
         std::to_string(uniform) + " uniform groups (" + std::to_string(uniform_nonzero) + " nonzero), " +
             std::to_string(mixed) + " mixed groups (" + std::to_string(mixed_zero) +
             " zero); finite differences on 100 trajectories: worst rel err " + f(worst) + ", " +
             std::to_string(fd_bad) + " over 1e-5");
}

void objective_vs_rifb() {
  RifbParams p;
  p.corpus.n_prompts = 500;
  const auto corpus = build_corpus(p.corpus);
  const RifbResult r = run_rifb(p, corpus);
  const bool ok = r.test && r.test->statistic >= 0.5 && r.test->p_value < 0.001;
  report(7, "objective vs informativeness", ok,
         std::to_string(r.samples.size()) + " trees, Spearman " + (r.test ? f(r.test->statistic) : "undefined") +
             ", permutation p " + (r.test ? f(r.test->p_value) : "undefined"));
}

void speculative_safety() {
  auto policy = [](std::uint64_t seed, double p) {
    PromptSpec s;
    s.seed = seed;
    s.p = p;
    return SimPolicy::build(s);
  };
  auto jsonl = [](const RolloutTree& t) { return tree_to_jsonl(t, {"p", "h", {}, {}}); };

  int identical = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SimPolicy pol = policy(1000 + seed, 0.35);
    BuildConfig seq;
    seq.seed = seed;
    BuildConfig spec = seq;
    spec.speculative.enabled = true;
    spec.speculative.workers = 1;
    spec.speculative.staleness_bound = 0;
    identical += jsonl(build_tree(pol, seq).tree) == jsonl(build_tree(pol, spec).tree);
  }

  long reconciliations = 0, outside = 0, accepted = 0, proposals = 0;
  int below_one = 0;
  for (std::uint64_t seed = 0; reconciliations < 10'000; ++seed) {
    const SimPolicy pol = policy(5000 + seed, 0.4);
    BuildConfig cfg;
    cfg.seed = seed;
    cfg.budget = 60;
    RolloutTree tree = initial_tree(pol, cfg);
    for (int round = 1; round <= 4 && reconciliations < 10'000; ++round) {
      const DepthStats stats = fit_depth_stats(tree);
      SpeculativeRoundConfig sc;
      sc.workers = 4;
      sc.staleness_bound = 2;
      sc.n_select = 4;
      sc.accept_rank = 4;
      sc.budget = cfg.budget;
      sc.seed = seed;
      sc.round = round;
      sc.drift_after_snapshot = make_drift_injector(pol, seed * 31 + round, 2);
      std::vector<NodeId> oracle_top;
      auto inject = make_drift_injector(pol, seed * 37 + round, 2);
      sc.drift_before_reconcile = [&](RolloutTree& t) {
        inject(t);
        const auto fr = expandable_frontier(t, t.limits().depth_cap);
        oracle_top.clear();
        if (!fr.empty()) oracle_top = select_top_n(score_frontier(t, fr, sc.coeffs, stats), sc.accept_rank);
      };
      const auto res = run_speculative_round(tree, pol, stats, sc);
      if (res.frontier.empty()) break;
      ++reconciliations;
      proposals += res.metrics.proposals;
      for (const auto& prop : res.outcome.accepted) {
        ++accepted;
        outside += std::find(oracle_top.begin(), oracle_top.end(), prop.node) == oracle_top.end();
      }
      below_one += res.metrics.acceptance_rate < 1.0;
    }
  }
  const double rate = proposals ? static_cast<double>(accepted) / proposals : 1.0;
  report(8, "speculative safety", identical == 100 && outside == 0 && rate < 1.0,
         std::to_string(identical) + "/100 byte-identical builds; " + std::to_string(reconciliations) +
             " reconciliations, " + std::to_string(outside) + " accepted outside fresh top-K; acceptance rate " +
             f(rate) + " (" + std::to_string(below_one) + " rounds below 1)");
}

void allocator_lift() {
  AbaParams p;
  p.corpus.n_prompts = 5000;
  const auto corpus = build_corpus(p.corpus);
  const AbaEvaluation e = run_aba_experiment(p, corpus);
  const bool inflation_exact = e.leaf_inflation == e.trigger_rate;
  const bool ok = e.roc_auc >= 0.70 && e.lift.estimate > 0 && e.lift.excludes_zero() && inflation_exact &&
                  e.shuffled_auc >= 0.45 && e.shuffled_auc <= 0.55;
  report(9, "allocator lift", ok,
         "held-out AUC " + f(e.roc_auc) + ", lift " + f(e.lift.estimate) + " CI [" + f(e.lift.lower) + ", " +
             f(e.lift.upper) + "], inflation " + f(e.leaf_inflation) + " vs trigger rate " + f(e.trigger_rate) +
             (inflation_exact ? " (equal)" : " (differ)") + ", shuffled AUC " + f(e.shuffled_auc));
}

void elimination() {
  EliminationParams p;
  p.corpus.n_prompts = 1000;
  const auto corpus = build_corpus(p.corpus);
  const EliminationResult r = run_elimination_matrix(p, corpus);
  auto show = [](const PairedEffect& e) {
    return f(e.diff.estimate) + " [" + f(e.diff.lower) + ", " + f(e.diff.upper) + "]";
  };
  const bool cost = r.cost_off_tool_calls.diff.lower > 0;
  const bool depth = r.depth_off_depth.diff.lower > 0;
  const bool entropy = r.entropy_off_mixed.diff.upper < 0;
  report(10, "elimination matrix", cost && depth && entropy,
         std::string("cost off: tool calls ") + show(r.cost_off_tool_calls) + (cost ? " ok" : " not higher") +
             "; depth off: depth " + show(r.depth_off_depth) + (depth ? " ok" : " not higher") +
             "; entropy off: mixed ratio " + show(r.entropy_off_mixed) + (entropy ? " ok" : " not lower"));
}

void budget_and_determinism() {
  CounterRng rng(2024);
  AllocatorModel always = AllocatorModel::zeros(35, 2);
  always.b2 = 3.0;
  auto shared = std::make_shared<const AllocatorModel>(always);
  int over = 0, mismatched = 0;
  for (int i = 0; i < 1000; ++i) {
    PromptSpec s;
    s.seed = rng();
    const double target = 0.02 + 0.96 * rng.uniform();
    const SimPolicy shape = SimPolicy::build(s);
    const SimPolicy pol = shape.recalibrated(std::min(target, shape.uncapped_mass() * (1.0 - 1e-9)));
    BuildConfig cfg;
    cfg.seed = rng();
    cfg.initial = 1 + static_cast<int>(rng.below(16));
    cfg.rounds = static_cast<int>(rng.below(5));
    cfg.n_select = 1 + static_cast<int>(rng.below(4));
    cfg.per_node = 1 + static_cast<int>(rng.below(4));
    cfg.budget = cfg.initial + static_cast<int>(rng.below(24));
    if (i % 2) cfg.allocator = shared;
    if (i % 3 == 0) {
      cfg.speculative.enabled = true;
      cfg.speculative.workers = 1 + static_cast<int>(rng.below(4));
      cfg.speculative.staleness_bound = static_cast<int>(rng.below(3));
    }
    const BuildResult a = build_tree(pol, cfg);
    const BuildResult b = build_tree(pol, cfg);
    over += static_cast<int>(a.tree.leaves().size()) > cfg.budget + 1;
    const auto hash = [](const BuildResult& r) {
      return sha256_hex(tree_to_jsonl(r.tree, {"p", "h", {}, {}}) + r.log.to_jsonl());
    };
    mismatched += hash(a) != hash(b);
  }
  report(11, "budget law and determinism", over == 0 && mismatched == 0,
         "1000 random builds, " + std::to_string(over) + " over budget + 1, " + std::to_string(mismatched) +
             " hash mismatches");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{collapse_law,    bound_sandwich,    greedy_ratio,
                                                    diminishing_returns, golden_suite, zero_gradient,
                                                    objective_vs_rifb, speculative_safety, allocator_lift,
                                                    elimination,     budget_and_determinism};
  try {
    for (const auto& c : criteria) c();
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << "\n";
    return 1;
  }
  std::cout << (11 - failures) << "/11 criteria pass" << std::endl;
  return 0;
}
