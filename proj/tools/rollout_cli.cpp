// Command-line front end for the tree-sampling experiments.
//
// Every subcommand reads an optional flat config file, applies --set key=value
// overrides and its own flags (which are folded into the same config), and
// writes its outputs under <output root>/<subcommand>/. Each CSV starts with a
// "# config_hash=" line; the canonical config is stored next to it as
// <hash>.cfg so the run can be regenerated.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rollout/config.hpp"
#include "rollout/errors.hpp"
#include "rollout/experiments.hpp"
#include "rollout/tree_io.hpp"

namespace fs = std::filesystem;
using namespace rollout;

namespace {

constexpr const char* kOutputEnv = "ROLLOUT_OUTPUT_ROOT";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
};

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number list: " + text);
    }
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

int get_threads(const Config& c) { return static_cast<int>(c.get_int("threads", 0)); }

CorpusSpec read_corpus(const Config& c, const CorpusSpec& defaults = {}) {
  CorpusSpec s = defaults;
  s.n_prompts = static_cast<int>(c.get_int("corpus.n_prompts", s.n_prompts));
  s.seed = c.get_u64("corpus.seed", s.seed);
  const std::string d = c.get_string("corpus.difficulty", s.difficulty == DifficultyProfile::fixed     ? "fixed"
                                                          : s.difficulty == DifficultyProfile::uniform ? "uniform"
                                                                                                       : "heavy_tail");
  if (d == "fixed")
    s.difficulty = DifficultyProfile::fixed;
  else if (d == "uniform")
    s.difficulty = DifficultyProfile::uniform;
  else if (d == "heavy_tail")
    s.difficulty = DifficultyProfile::heavy_tail;
  else
    throw ConfigError("corpus.difficulty must be fixed, uniform or heavy_tail");
  s.fixed_p = c.get_double("corpus.fixed_p", s.fixed_p);
  s.easy_fraction = c.get_double("corpus.easy_fraction", s.easy_fraction);
  s.tail_exponent = c.get_double("corpus.tail_exponent", s.tail_exponent);
  s.tail_scale = c.get_double("corpus.tail_scale", s.tail_scale);
  s.coupling = c.get_bool("corpus.coupling", s.coupling);
  s.base.coupling_power = c.get_double("corpus.coupling_power", s.base.coupling_power);
  s.rescuable_fraction = c.get_double("corpus.rescuable_fraction", s.rescuable_fraction);
  s.rescue_uplift = c.get_double("corpus.rescue_uplift", s.rescue_uplift);
  s.embedding_signal = c.get_double("corpus.embedding_signal", s.embedding_signal);
  s.base.tool_cap = static_cast<int>(c.get_int("build.tool_cap", s.base.tool_cap));
  if (s.n_prompts < 1) throw ConfigError("corpus.n_prompts must be >= 1");
  return s;
}

BuildConfig read_build(const Config& c) {
  BuildConfig b;
  b.initial = static_cast<int>(c.get_int("build.initial", b.initial));
  b.rounds = static_cast<int>(c.get_int("build.rounds", b.rounds));
  b.n_select = static_cast<int>(c.get_int("build.n_select", b.n_select));
  b.per_node = static_cast<int>(c.get_int("build.per_node", b.per_node));
  b.budget = static_cast<int>(c.get_int("build.budget", b.budget));
  b.limits.depth_cap = static_cast<int>(c.get_int("build.depth_cap", b.limits.depth_cap));
  b.limits.tool_cap = static_cast<int>(c.get_int("build.tool_cap", b.limits.tool_cap));
  b.limits.branching_cap = static_cast<int>(c.get_int("build.branching_cap", b.limits.branching_cap));
  b.coeffs.c = c.get_double("uucb.c", b.coeffs.c);
  b.coeffs.lambda_h = c.get_double("uucb.lambda_h", b.coeffs.lambda_h);
  b.coeffs.lambda_c = c.get_double("uucb.lambda_c", b.coeffs.lambda_c);
  b.coeffs.lambda_d = c.get_double("uucb.lambda_d", b.coeffs.lambda_d);
  b.seed = c.get_u64("seed", b.seed);
  b.rescue_temperature = c.get_double("build.rescue_temperature", b.rescue_temperature);
  b.speculative.enabled = c.get_bool("speculative.enabled", false);
  b.speculative.workers = static_cast<int>(c.get_int("speculative.workers", b.speculative.workers));
  b.speculative.staleness_bound = static_cast<int>(c.get_int("speculative.staleness", b.speculative.staleness_bound));
  b.speculative.accept_rank = static_cast<int>(c.get_int("speculative.accept_rank", b.speculative.accept_rank));
  b.validate();
  return b;
}

ImprovementParams read_improvement(const Config& c) {
  ImprovementParams p;
  p.lambda = c.get_double("credit.lambda", p.lambda);
  p.alpha = c.get_double("credit.alpha", p.alpha);
  p.step = c.get_double("credit.step", p.step);
  return p;
}

TrainHyper read_hyper(const Config& c) {
  TrainHyper h;
  h.lr = c.get_double("aba.lr", h.lr);
  h.epochs = static_cast<int>(c.get_int("aba.epochs", h.epochs));
  h.width = static_cast<int>(c.get_int("aba.width", h.width));
  h.l2 = c.get_double("aba.l2", h.l2);
  h.seed = c.get_u64("aba.seed", h.seed);
  return h;
}

AllocatorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open allocator model " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return AllocatorModel::from_json(ss.str());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("malformed allocator model " + path + ": " + e.what());
  }
}

/// Output sink for one subcommand run.
class Run {
 public:
  Run(const Common& common, const std::string& name, Config cfg) : cfg_(std::move(cfg)) {
    std::string root = common.out;
    if (root.empty()) {
      const char* env = std::getenv(kOutputEnv);
      root = env && *env ? env : "results";
    }
    dir_ = fs::path(root) / name;
    fs::create_directories(dir_);
    hash_ = cfg_.hash();
    std::ofstream(dir_ / (hash_ + ".cfg"), std::ios::binary) << cfg_.canonical();
  }

  const Config& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }

  void write(const std::string& file, const std::string& text) const {
    const fs::path p = dir_ / file;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
    std::cout << "wrote " << p.string() << "\n";
  }
  void csv(const std::string& file, const Table& t) const { write(file, t.to_csv(hash_)); }

 private:
  Config cfg_;
  fs::path dir_;
  std::string hash_;
};

Config load_config(const Common& common) {
  Config c = common.config_path.empty() ? Config{} : Config::load(common.config_path);
  for (const auto& o : common.overrides) c.apply_override(o);
  return c;
}

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("-c,--config", common.config_path, "flat key=value config file");
  sub->add_option("-s,--set", common.overrides, "override, key=value (repeatable)");
  sub->add_option("-o,--out", common.out, std::string("output root (default: $") + kOutputEnv + " or ./results)");
}

/// Folds a flag into the config when it was given on the command line.
template <class T>
void fold(Config& c, const CLI::Option* opt, const std::string& key, const T& value) {
  if (opt->count() == 0) return;
  std::ostringstream ss;
  ss << value;
  c.set(key, ss.str());
}

// ---------------------------------------------------------------------------

void cmd_collapse_curve(const Run& run) {
  const Config& c = run.config();
  CollapseCurveParams p;
  if (c.has("collapse.ps")) p.ps = parse_doubles(c.get_string("collapse.ps", ""));
  if (c.has("collapse.budgets")) {
    p.budgets.clear();
    for (double b : parse_doubles(c.get_string("collapse.budgets", ""))) p.budgets.push_back(static_cast<int>(b));
  }
  p.trials = c.get_int("collapse.trials", p.trials);
  p.seed = c.get_u64("seed", p.seed);
  p.threads = get_threads(c);
  const auto rows = run_collapse_curve(p);
  for (const auto& r : rows)
    if (std::abs(r.z_score()) > 5.0) throw InvariantViolation("collapse estimate far outside its binomial band");
  run.csv("collapse_curve.csv", collapse_curve_table(rows));
}

void cmd_build_tree(const Run& run) {
  const Config& c = run.config();
  const CorpusSpec cs = read_corpus(c);
  BuildConfig b = read_build(c);
  const int prompt = static_cast<int>(c.get_int("prompt", 0));
  if (prompt < 0 || prompt >= cs.n_prompts) throw ConfigError("prompt index outside the corpus");
  b.seed += static_cast<std::uint64_t>(prompt);
  if (c.has("aba.model")) b.allocator = std::make_shared<const AllocatorModel>(load_model(c.get_string("aba.model", "")));
  const SimPolicy policy = SimPolicy::build(corpus_prompt(cs, prompt));
  const BuildResult res = build_tree(policy, b);
  TreeHeader h;
  h.prompt_id = "prompt-" + std::to_string(prompt);
  h.config_hash = run.hash();
  h.embedding.assign(policy.embedding().data(), policy.embedding().data() + policy.embedding().size());
  run.write("tree.jsonl", tree_to_jsonl(res.tree, h));
  run.write("build_log.jsonl", res.log.to_jsonl());
  const auto oc = outcome_counts(res.tree);
  std::cout << "leaves=" << res.tree.leaves().size() << " success=" << oc.n_success << " fail=" << oc.n_fail
            << " mixed=" << oc.mixed() << "\n";
}

void cmd_oracle_compare(const Run& run) {
  const Config& c = run.config();
  OracleParams p;
  p.instances = static_cast<int>(c.get_int("oracle.instances", p.instances));
  p.max_candidates = static_cast<int>(c.get_int("oracle.max_candidates", p.max_candidates));
  p.budget = static_cast<int>(c.get_int("oracle.budget", p.budget));
  p.per_node = static_cast<int>(c.get_int("oracle.per_node", p.per_node));
  p.seed = c.get_u64("seed", p.seed);
  p.corpus = read_corpus(c, p.corpus);
  p.build = read_build(c);
  p.threads = get_threads(c);
  if (p.max_candidates > ScheduleProblem::kMaxCandidates) throw ConfigError("oracle.max_candidates must be <= 20");
  const auto rows = run_oracle_compare(p);
  run.csv("oracle_compare.csv", oracle_table(rows));

  int gated = 0, below = 0, cov_bad = 0;
  for (const auto& r : rows) {
    cov_bad += !r.coverage_submodular;
    if (!(r.submodular && r.monotone)) continue;
    ++gated;
    below += r.ratio < 1.0 - 1.0 / std::exp(1.0) - 1e-9;
  }
  std::printf("instances=%zu guarantee_applies=%d below_bound=%d coverage_violation_rate=%.4f\n", rows.size(), gated,
              below, rows.empty() ? 0.0 : double(cov_bad) / double(rows.size()));

  DiminishingParams dp;
  dp.pairs = static_cast<int>(c.get_int("oracle.pairs", dp.pairs));
  dp.permutations = static_cast<int>(c.get_int("oracle.permutations", dp.permutations));
  dp.problems = p;
  if (dp.pairs > 0) {
    const auto d = run_diminishing_returns(dp);
    Table t;
    t.columns = {"set_size", "marginal_gain"};
    for (std::size_t i = 0; i < d.gains.size(); ++i) t.add({fmt(d.set_sizes[i]), fmt(d.gains[i])});
    run.csv("diminishing_returns.csv", t);
    if (d.test) std::printf("spearman(gain,|S|)=%.4f p=%.3g\n", d.test->statistic, d.test->p_value);
  }
  if (below > 0) throw InvariantViolation("greedy fell below the guarantee on an instance where it applies");
}

void cmd_grid_sweep(const Run& run) {
  const Config& c = run.config();
  GridParams p;
  if (c.has("grid.lambda_h")) p.lambda_h = parse_doubles(c.get_string("grid.lambda_h", ""));
  if (c.has("grid.lambda_c")) p.lambda_c = parse_doubles(c.get_string("grid.lambda_c", ""));
  if (c.has("grid.lambda_d")) p.lambda_d = parse_doubles(c.get_string("grid.lambda_d", ""));
  p.seeds = static_cast<int>(c.get_int("grid.seeds", p.seeds));
  p.band = c.get_double("grid.band", p.band);
  p.build = read_build(c);
  p.improvement = read_improvement(c);
  p.threads = get_threads(c);
  const auto corpus = build_corpus(read_corpus(c), p.threads);
  const auto r = run_grid_sweep(p, corpus);
  run.csv("grid_sweep.csv", grid_table(r));
  std::printf("best=%.6f plateau_fraction=%.4f band=%g\n", r.best, r.plateau_fraction, p.band);
}

void cmd_elimination(const Run& run) {
  const Config& c = run.config();
  EliminationParams p;
  p.build = read_build(c);
  p.improvement = read_improvement(c);
  p.seed = c.get_u64("seed", p.seed);
  p.threads = get_threads(c);
  CorpusSpec d;
  d.n_prompts = 1000;
  const auto corpus = build_corpus(read_corpus(c, d), p.threads);
  const auto r = run_elimination_matrix(p, corpus);
  run.csv("elimination_matrix.csv", elimination_table(r));
  Table t;
  t.columns = {"effect", "estimate", "ci_lower", "ci_upper"};
  for (const auto* e : {&r.cost_off_tool_calls, &r.depth_off_depth, &r.entropy_off_mixed})
    t.add({e->name, fmt(e->diff.estimate), fmt(e->diff.lower), fmt(e->diff.upper)});
  run.csv("elimination_effects.csv", t);
}

void cmd_lambda_alpha(const Run& run) {
  const Config& c = run.config();
  SweepParams p;
  if (c.has("sweep.lambdas")) p.lambdas = parse_doubles(c.get_string("sweep.lambdas", ""));
  if (c.has("sweep.alphas")) p.alphas = parse_doubles(c.get_string("sweep.alphas", ""));
  p.build = read_build(c);
  p.step = c.get_double("credit.step", p.step);
  p.threads = get_threads(c);
  const auto corpus = build_corpus(read_corpus(c), p.threads);
  run.csv("lambda_alpha_sweep.csv", sweep_table(run_lambda_alpha_sweep(p, corpus)));
}

AbaParams read_aba(const Config& c) {
  AbaParams p;
  p.build = read_build(c);
  p.hyper = read_hyper(c);
  p.train_fraction = c.get_double("aba.train_fraction", p.train_fraction);
  p.shuffle_seed = c.get_u64("aba.shuffle_seed", p.shuffle_seed);
  p.shuffles = static_cast<int>(c.get_int("aba.shuffles", p.shuffles));
  p.bootstrap = static_cast<int>(c.get_int("aba.bootstrap", p.bootstrap));
  p.threads = get_threads(c);
  if (!(p.train_fraction > 0.0 && p.train_fraction < 1.0)) throw ConfigError("aba.train_fraction must lie in (0, 1)");
  return p;
}

void cmd_train_aba(const Run& run) {
  const Config& c = run.config();
  const AbaParams p = read_aba(c);
  CorpusSpec d;
  d.n_prompts = 5000;
  const auto corpus = build_corpus(read_corpus(c, d), p.threads);
  const AbaEvaluation e = run_aba_experiment(p, corpus);
  run.write("allocator.json", e.model.to_json() + "\n");
  run.csv("aba_metrics.csv", aba_table(e));
  std::printf("auc=%.4f shuffled_auc=%.4f lift=%.4f [%.4f, %.4f]\n", e.roc_auc, e.shuffled_auc, e.lift.estimate,
              e.lift.lower, e.lift.upper);
  if (std::abs(e.leaf_inflation - e.trigger_rate) > 1e-12)
    throw InvariantViolation("leaf inflation differs from the trigger rate");
}

void cmd_eval_aba(const Run& run) {
  const Config& c = run.config();
  if (!c.has("aba.model")) throw ConfigError("eval-aba needs aba.model=<path> (or --model)");
  const AllocatorModel model = load_model(c.get_string("aba.model", ""));
  const AbaParams p = read_aba(c);
  const auto corpus = build_corpus(read_corpus(c), p.threads);
  std::vector<int> prompts(corpus.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) prompts[i] = static_cast<int>(i);
  const AbaEvaluation e = evaluate_allocator(model, corpus, prompts, p.build, p.bootstrap, p.threads);
  Table t = aba_table(e);
  // AUC and control rows are training-time quantities; drop them here.
  std::erase_if(t.rows, [](const auto& r) {
    return r[0] == "roc_auc" || r[0] == "roc_auc_mann_whitney" || r[0] == "shuffled_auc" || r[0] == "train_accuracy";
  });
  run.csv("aba_eval.csv", t);
  if (std::abs(e.leaf_inflation - e.trigger_rate) > 1e-12)
    throw InvariantViolation("leaf inflation differs from the trigger rate");
}

void cmd_bench(const Run& run) {
  const Config& c = run.config();
  BenchParams p;
  p.rounds = static_cast<int>(c.get_int("bench.rounds", p.rounds));
  p.workers = static_cast<int>(c.get_int("bench.workers", p.workers));
  p.staleness = static_cast<int>(c.get_int("bench.staleness", p.staleness));
  p.n_select = static_cast<int>(c.get_int("bench.n_select", p.n_select));
  p.per_node = static_cast<int>(c.get_int("bench.per_node", p.per_node));
  p.accept_rank = static_cast<int>(c.get_int("bench.accept_rank", p.accept_rank));
  p.drift = static_cast<int>(c.get_int("bench.drift", p.drift));
  p.latency_us = static_cast<int>(c.get_int("bench.latency_us", p.latency_us));
  p.corpus = read_corpus(c);
  p.build = read_build(c);
  if (p.rounds < 1 || p.workers < 1 || p.staleness < 0 || p.n_select < 1 || p.per_node < 1 || p.accept_rank < 1 ||
      p.drift < 0 || p.latency_us < 0)
    throw ConfigError("invalid bench settings");
  const auto rows = run_bench_speculative(p);
  run.csv("bench_speculative.csv", bench_table(rows));
  double acc = 0, seq = 0, spec = 0;
  for (const auto& r : rows) {
    acc += r.acceptance_rate;
    seq += r.latency_sequential;
    spec += r.latency_speculative;
  }
  std::printf("mean_acceptance=%.4f sequential_s=%.4f speculative_s=%.4f\n", acc / rows.size(), seq, spec);
}

void cmd_rifb(const Run& run) {
  const Config& c = run.config();
  RifbParams p;
  p.build = read_build(c);
  p.lambda = c.get_double("credit.lambda", p.lambda);
  p.alpha = c.get_double("credit.alpha", p.alpha);
  p.permutations = static_cast<int>(c.get_int("rifb.permutations", p.permutations));
  p.seed = c.get_u64("rifb.seed", p.seed);
  p.threads = get_threads(c);
  CorpusSpec d;
  d.n_prompts = 500;
  const auto corpus = build_corpus(read_corpus(c, d), p.threads);
  const auto r = run_rifb(p, corpus);
  run.csv("rifb.csv", rifb_table(r));
  for (const auto& s : r.samples)
    if (s.sigma == 0.0 && s.rifb != 0.0) throw InvariantViolation("uniform-outcome group with nonzero gradient mass");
}

void cmd_trajectory(const Run& run) {
  const Config& c = run.config();
  TrajectoryParams p;
  p.steps = static_cast<int>(c.get_int("trajectory.steps", p.steps));
  p.drift_rate = c.get_double("trajectory.drift_rate", p.drift_rate);
  p.flat_budget = static_cast<int>(c.get_int("trajectory.flat_budget", p.flat_budget));
  p.build = read_build(c);
  p.seed = c.get_u64("seed", p.seed);
  p.threads = get_threads(c);
  const auto corpus = build_corpus(read_corpus(c), p.threads);
  AllocatorModel model;
  if (c.has("aba.model")) {
    model = load_model(c.get_string("aba.model", ""));
  } else {
    // No model given: train one on a disjoint corpus.
    CorpusSpec ts = read_corpus(c);
    ts.seed += 7919;
    ts.n_prompts = static_cast<int>(c.get_int("trajectory.train_prompts", 2000));
    const auto data = make_aba_dataset(build_corpus(ts, p.threads), p.build, p.threads);
    model = train_allocator(data.examples, read_hyper(c));
  }
  const auto rows = run_collapse_trajectory(p, corpus, model);
  for (const auto& r : rows)
    if (r.tree_aba > r.tree + 1e-12) throw InvariantViolation("rescue increased the collapse rate");
  run.csv("collapse_trajectory.csv", trajectory_table(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-structured rollout sampling experiments"};
  app.require_subcommand(1);

  Common common;
  std::function<void()> action;
  Config flags;

  auto sub = [&](const std::string& name, const std::string& help, void (*fn)(const Run&)) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, common);
    s->callback([&, name, fn] {
      action = [&, name, fn] {
        Config c = load_config(common);
        for (const auto& [k, v] : flags.values()) c.set(k, v);
        fn(Run(common, name, std::move(c)));
      };
    });
    return s;
  };

  // Flag values live here until the chosen subcommand's callback folds them in.
  long seed = 0, threads = 0, prompt = 0, rounds = 0, workers = 0, staleness = 0, instances = 0, trials = 0;
  std::string model;
  std::vector<CLI::Option*> seed_opts, thread_opts;

  auto with_basics = [&](CLI::App* s) {
    seed_opts.push_back(s->add_option("--seed", seed, "global seed"));
    thread_opts.push_back(s->add_option("--threads", threads, "worker threads (0 = all cores)"));
    return s;
  };

  CLI::App* cc = with_basics(sub("collapse-curve", "Monte Carlo collapse rate over a (p, B) grid", cmd_collapse_curve));
  auto* trials_opt = cc->add_option("--trials", trials, "trials per cell");
  CLI::App* bt = with_basics(sub("build-tree", "build one tree and write it as JSONL", cmd_build_tree));
  auto* prompt_opt = bt->add_option("--prompt", prompt, "corpus prompt index");
  auto* model_opt_bt = bt->add_option("--model", model, "allocator model JSON for the rescue line");
  CLI::App* oc = with_basics(sub("oracle-compare", "greedy versus exhaustive expansion schedules", cmd_oracle_compare));
  auto* inst_opt = oc->add_option("--instances", instances, "number of schedule problems");
  with_basics(sub("grid-sweep", "score-coefficient grid with plateau statistics", cmd_grid_sweep));
  with_basics(sub("elimination-matrix", "toggle the three score penalties on and off", cmd_elimination));
  with_basics(sub("lambda-alpha-sweep", "advantage mixing / depth-decay sweep", cmd_lambda_alpha));
  with_basics(sub("train-aba", "train the rescue allocator and report held-out metrics", cmd_train_aba));
  CLI::App* ea = with_basics(sub("eval-aba", "A/B a trained allocator on a corpus", cmd_eval_aba));
  auto* model_opt_ea = ea->add_option("--model", model, "allocator model JSON");
  CLI::App* bs = with_basics(sub("bench-speculative", "sequential versus speculative expansion rounds", cmd_bench));
  auto* rounds_opt = bs->add_option("--rounds", rounds, "rounds (one prompt each)");
  auto* workers_opt = bs->add_option("--workers", workers, "proposal workers");
  auto* stale_opt = bs->add_option("--staleness", staleness, "staleness bound");
  with_basics(sub("rifb", "objective versus gradient mass correlation", cmd_rifb));
  CLI::App* ct = with_basics(sub("collapse-trajectory", "collapse rate under scripted policy drift", cmd_trajectory));
  auto* model_opt_ct = ct->add_option("--model", model, "allocator model JSON (trained on the fly if absent)");

  try {
    app.parse(argc, argv);
    for (auto* o : seed_opts) fold(flags, o, "seed", seed);
    for (auto* o : thread_opts) fold(flags, o, "threads", threads);
    fold(flags, trials_opt, "collapse.trials", trials);
    fold(flags, prompt_opt, "prompt", prompt);
    for (auto* o : {model_opt_bt, model_opt_ea, model_opt_ct}) fold(flags, o, "aba.model", model);
    fold(flags, inst_opt, "oracle.instances", instances);
    fold(flags, rounds_opt, "bench.rounds", rounds);
    fold(flags, workers_opt, "bench.workers", workers);
    fold(flags, stale_opt, "bench.staleness", staleness);
    action();
    return 0;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const StructuralError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
