#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rollout/allocator.hpp"
#include "rollout/builder.hpp"
#include "rollout/credit.hpp"
#include "rollout/objective.hpp"
#include "rollout/sim_env.hpp"
#include "rollout/stats.hpp"

namespace rollout {

/// Column-oriented CSV table. Every emitted file starts with a comment line
/// carrying the configuration hash.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string to_csv(const std::string& config_hash) const;
};

std::string fmt(double v);
std::string fmt(long v);
inline std::string fmt(int v) { return fmt(static_cast<long>(v)); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }

/// Builds `n_prompts` policies in parallel (deterministic: order does not depend on threads).
std::vector<SimPolicy> build_corpus(const CorpusSpec& spec, int threads = 0);

/// Runs f(i) for i in [0, n) across threads; results land at index i.
void parallel_for(int n, int threads, const std::function<void(int)>& f);

// ---------------------------------------------------------------------------
// Collapse law.

struct CollapseCurveParams {
  std::vector<double> ps{0.01, 0.05, 0.1, 0.3, 0.5};
  std::vector<int> budgets{2, 4, 8, 16, 32, 64};
  long trials = 1'000'000;
  std::uint64_t seed = 1;
  int threads = 0;
};

std::vector<CollapseEstimate> run_collapse_curve(const CollapseCurveParams& p);
Table collapse_curve_table(const std::vector<CollapseEstimate>& rows);

// ---------------------------------------------------------------------------
// Greedy versus exhaustive schedules.

struct OracleParams {
  int instances = 200;
  int max_candidates = 12;
  int budget = 4;
  int per_node = 2;
  std::uint64_t seed = 11;
  ObjectiveWeights weights{};
  BuildConfig build{};
  CorpusSpec corpus = [] {
    CorpusSpec c;
    c.difficulty = DifficultyProfile::uniform;
    c.seed = 101;
    return c;
  }();
  int threads = 0;
};

/// The schedule problem for instance i: initial tree of a corpus prompt plus
/// pre-drawn rollouts for up to max_candidates frontier nodes.
ExpansionModel oracle_instance(const OracleParams& p, int i);

struct OracleRow {
  int instance = 0;
  int candidates = 0;
  double f_empty = 0.0;
  double f_greedy = 0.0;  ///< normalized: F(S) - F(empty)
  double f_opt = 0.0;     ///< normalized
  double ratio = 1.0;
  bool submodular = false;
  bool monotone = false;
  bool coverage_submodular = false;
  bool contrast_submodular = false;
  bool novelty_monotone = false;
  bool contrast_monotone = false;
};

std::vector<OracleRow> run_oracle_compare(const OracleParams& p);
Table oracle_table(const std::vector<OracleRow>& rows);

struct DiminishingParams {
  int pairs = 2000;
  int permutations = 10'000;
  OracleParams problems{};
};

struct DiminishingResult {
  std::vector<double> set_sizes;
  std::vector<double> gains;
  std::optional<stats::PermutationResult> test;
};

DiminishingResult run_diminishing_returns(const DiminishingParams& p);

// ---------------------------------------------------------------------------
// Policy-improvement metric and the sweeps built on it.

struct ImprovementParams {
  double lambda = 0.5;
  double alpha = 0.7;
  double step = 1.0;  ///< gradient-ascent step on the logits, scaled by 1/|leaves|
};

/// Exact success probability at temperature 1 after one gradient step on the
/// tree's leaves with the mixed advantage. The sim stand-in for an evaluation score.
double improved_success(const SimPolicy& policy, const RolloutTree& tree, const ImprovementParams& p);

struct PromptMetrics {
  bool mixed = false;
  double mean_depth = 0.0;       ///< mean leaf depth
  double mean_tool_calls = 0.0;  ///< mean tool calls per rollout (leaf path cost)
  double reward = 0.0;           ///< improved_success
  int leaves = 0;
};

PromptMetrics prompt_metrics(const SimPolicy& policy, const RolloutTree& tree, const ImprovementParams& p);

struct EliminationParams {
  CorpusSpec corpus{};
  BuildConfig build{};
  ImprovementParams improvement{};
  std::uint64_t seed = 21;
  int threads = 0;
};

struct EliminationRow {
  bool entropy_on = true, cost_on = true, depth_on = true;
  double mixed_ratio = 0.0, mean_depth = 0.0, mean_tool_calls = 0.0, reward = 0.0;
  std::vector<PromptMetrics> per_prompt;
};

struct PairedEffect {
  std::string name;
  stats::Interval diff;  ///< mean of (off - on) with a 95% normal interval
};

struct EliminationResult {
  std::vector<EliminationRow> rows;  ///< 8 rows, all-on first
  PairedEffect cost_off_tool_calls;  ///< tool calls(cost off) - tool calls(all on)
  PairedEffect depth_off_depth;      ///< depth(depth off) - depth(all on)
  PairedEffect entropy_off_mixed;    ///< mixed(entropy off) - mixed(all on)
};

EliminationResult run_elimination_matrix(const EliminationParams& p, const std::vector<SimPolicy>& corpus);
Table elimination_table(const EliminationResult& r);

struct SweepParams {
  std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> alphas{0.5, 0.6, 0.7, 0.8, 0.9};
  BuildConfig build{};
  double step = 1.0;
  int threads = 0;
};

struct SweepCell {
  double lambda = 0.0, alpha = 0.0, reward = 0.0;
};

std::vector<SweepCell> run_lambda_alpha_sweep(const SweepParams& p, const std::vector<SimPolicy>& corpus);
Table sweep_table(const std::vector<SweepCell>& cells);

struct GridParams {
  std::vector<double> lambda_h{0.05, 0.1, 0.2, 0.3, 0.5};
  std::vector<double> lambda_c{0.01, 0.05, 0.1, 0.2, 0.5};
  std::vector<double> lambda_d{0.0, 0.05, 0.1, 0.2, 0.5};
  int seeds = 3;
  double band = 0.021;  ///< plateau band in metric units
  BuildConfig build{};
  ImprovementParams improvement{};
  int threads = 0;
};

struct GridCell {
  double lambda_h = 0, lambda_c = 0, lambda_d = 0;
  double reward = 0;       ///< mean over seeds
  double seed_std = 0;     ///< population std of the per-seed means
  bool in_plateau = false;
};

struct GridResult {
  std::vector<GridCell> cells;
  double best = 0.0;
  double plateau_fraction = 0.0;
};

GridResult run_grid_sweep(const GridParams& p, const std::vector<SimPolicy>& corpus);
Table grid_table(const GridResult& r);

// ---------------------------------------------------------------------------
// Allocator experiments.

struct AbaParams {
  CorpusSpec corpus{};
  BuildConfig build{};
  TrainHyper hyper{};
  double train_fraction = 0.7;
  std::uint64_t shuffle_seed = 5;
  int shuffles = 5;  ///< label permutations averaged by the control
  int bootstrap = 2000;
  int threads = 0;
};

struct AbaDataset {
  std::vector<RescueExample> examples;
  std::vector<int> prompt_index;  ///< corpus index of each example
  int prompts = 0;
};

/// Builds every corpus tree without rescue and labels the uniform ones.
AbaDataset make_aba_dataset(const std::vector<SimPolicy>& corpus, const BuildConfig& build, int threads = 0);

struct AbaEvaluation {
  double roc_auc = 0.0;
  double roc_auc_mann_whitney = 0.0;
  double shuffled_auc = 0.0;  ///< mean held-out AUC over label-shuffled retrains
  double train_accuracy = 0.0;
  double hit_at_1 = 0.0;  ///< fraction of triggered rescues that produced a mixed tree
  double mixed_ratio_with = 0.0, mixed_ratio_without = 0.0;
  double collapse_rate_with = 0.0, collapse_rate_without = 0.0;
  double trigger_rate = 0.0;          ///< triggers / evaluated prompts
  double trigger_rate_uniform = 0.0;  ///< triggers / uniform-outcome prompts
  double leaf_inflation = 0.0;        ///< mean leaves(with) - mean leaves(without)
  int eval_prompts = 0;
  int triggers = 0;
  stats::Interval lift;  ///< paired bootstrap CI of mixed(with) - mixed(without)
  AllocatorModel model;
};

AbaEvaluation run_aba_experiment(const AbaParams& p, const std::vector<SimPolicy>& corpus);
Table aba_table(const AbaEvaluation& e);

/// A/B metrics of a given model on the listed corpus prompts (no training).
/// Prompt i is built with seed build.seed + i, as in make_aba_dataset.
AbaEvaluation evaluate_allocator(const AllocatorModel& model, const std::vector<SimPolicy>& corpus,
                                 const std::vector<int>& prompts, const BuildConfig& build, int bootstrap,
                                 int threads = 0);

// ---------------------------------------------------------------------------
// Speculative expansion.

/// Hook that backs up `count` extra rollouts from random frontier nodes,
/// modelling writes that land while workers hold stale snapshots.
std::function<void(RolloutTree&)> make_drift_injector(const SimPolicy& policy, std::uint64_t seed, int count);

struct BenchParams {
  int rounds = 20;
  int workers = 4;
  int staleness = 2;
  int n_select = 4;
  int per_node = 4;
  int accept_rank = 4;
  int drift = 2;            ///< injected backups per phase
  int latency_us = 2000;    ///< simulated per-rollout generation latency
  CorpusSpec corpus{};
  BuildConfig build{};
};

struct BenchRow {
  int round = 0;
  double acceptance_rate = 1.0;
  int rollbacks = 0;
  double latency_sequential = 0.0;
  double latency_speculative = 0.0;
  double q_drift = 0.0;
};

std::vector<BenchRow> run_bench_speculative(const BenchParams& p);
Table bench_table(const std::vector<BenchRow>& rows);

// ---------------------------------------------------------------------------
// Informativeness versus gradient mass.

struct RifbParams {
  CorpusSpec corpus{};
  BuildConfig build{};
  ObjectiveWeights weights{};
  double lambda = 0.5;
  double alpha = 0.7;
  int permutations = 10'000;
  std::uint64_t seed = 31;
  int threads = 0;
};

struct RifbResult {
  std::vector<RifbSample> samples;
  std::optional<stats::PermutationResult> test;
};

RifbResult run_rifb(const RifbParams& p, const std::vector<SimPolicy>& corpus);
RifbResult rifb_from_trees(const std::vector<RolloutTree>& trees, const std::vector<const SimPolicy*>& policies,
                           const RifbParams& p);
Table rifb_table(const RifbResult& r);

// ---------------------------------------------------------------------------
// Collapse over a scripted drift.

struct TrajectoryParams {
  int steps = 10;
  double drift_rate = 0.15;  ///< logit(p) is scaled by (1 + rate * step)
  int flat_budget = 16;
  BuildConfig build{};
  std::uint64_t seed = 41;
  int threads = 0;
};

struct TrajectoryRow {
  int step = 0;
  double flat_exact = 0.0;      ///< mixture of p^B + (1-p)^B over the corpus
  double flat_empirical = 0.0;
  double tree = 0.0;
  double tree_aba = 0.0;
};

std::vector<TrajectoryRow> run_collapse_trajectory(const TrajectoryParams& p, const std::vector<SimPolicy>& corpus,
                                                   const AllocatorModel& model);
Table trajectory_table(const std::vector<TrajectoryRow>& rows);

}  // namespace rollout
