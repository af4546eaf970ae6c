// Copyright 2026 The socnav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "socnav/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "socnav/continual.hpp"
#include "socnav/eval.hpp"
#include "socnav/policy.hpp"
#include "socnav/predictor.hpp"
#include "socnav/rng.hpp"
#include "socnav/socialforce.hpp"

namespace socnav {

namespace {

namespace fs = std::filesystem;

// Exclusive lock on the output directory for the lifetime of a command.
class DirLock {
 public:
  explicit DirLock(const std::string& out_path) {
    fs::path dir = fs::path(out_path).parent_path();
    if (dir.empty()) dir = ".";
    path_ = (dir / ".socnav.lock").string();
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
      throw std::runtime_error("output directory is locked by another command (" +
                               path_ + ")");
    std::fclose(f);
  }
  ~DirLock() {
    if (!path_.empty()) std::remove(path_.c_str());
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

struct CommonOptions {
  std::string config_path;
  uint64_t seed = 0;
  double dt = 0.33;
  ObjectiveWeights weights;
  std::string ps_variant = "literal_min";
  int batch = 80;
  double lr = 1e-3;
  int epochs = 20;
};

PsVariant parse_ps_variant(const std::string& name) {
  if (name == "literal_min") return PsVariant::kLiteralMin;
  if (name == "mean") return PsVariant::kMean;
  if (name == "max_penetration") return PsVariant::kMaxPenetration;
  throw CLI::ValidationError("ps_variant", "unknown variant '" + name + "'");
}

// Declares the options shared by every command, with units and defaults in
// the help text. Values already set from a config file survive unless the
// flag appears on the command line.
void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "flat key = value config file");
  cmd->add_option("--seed", opt.seed, "root RNG seed (default 0)");
  cmd->add_option("--dt", opt.dt, "control period in seconds (default 0.33)");
  cmd->add_option("--batch", opt.batch, "minibatch size (default 80)");
  cmd->add_option("--lr", opt.lr, "Adam learning rate (default 1e-3)");
  cmd->add_option("--epochs", opt.epochs, "training epochs (default 20)");
  cmd->add_option("--w-c", opt.weights.w_c, "collision weight inside J_nav (default 10)");
  cmd->add_option("--w-r", opt.weights.w_r, "regularization weight (default 1)");
  cmd->add_option("--w-cp", opt.weights.w_cp, "counterfactual weight (default 10)");
  cmd->add_option("--w-ps", opt.weights.w_ps, "personal-space weight (default 100)");
  cmd->add_option("--w-i", opt.weights.w_i, "interaction weight (default 1.5)");
  cmd->add_option("--r-h", opt.weights.r_h, "personal space radius in meters (default 0.45)");
  cmd->add_option("--r-r", opt.weights.r_r, "robot radius in meters (default 0.25)");
  cmd->add_option("--ps-variant", opt.ps_variant,
                  "personal-space form: literal_min | mean | max_penetration");
}

// Config file values beat built-in defaults but lose to explicit flags.
void apply_config(CLI::App* cmd, CommonOptions& opt) {
  if (opt.config_path.empty()) return;
  if (!fs::exists(opt.config_path))
    throw std::runtime_error("config file not found: " + opt.config_path);
  auto kv = parse_config_file(opt.config_path);
  auto set_if = [&](const char* key, auto& target) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    const std::string flag = "--" + std::string(key);
    std::string flag_dashed = flag;
    for (auto& c : flag_dashed)
      if (c == '_') c = '-';
    const CLI::Option* o = cmd->get_option_no_throw(flag_dashed);
    if (o && o->count() > 0) return;  // explicit flag wins
    std::istringstream ss(it->second);
    ss >> target;
  };
  set_if("seed", opt.seed);
  set_if("dt", opt.dt);
  set_if("batch", opt.batch);
  set_if("lr", opt.lr);
  set_if("epochs", opt.epochs);
  set_if("w_c", opt.weights.w_c);
  set_if("w_r", opt.weights.w_r);
  set_if("w_cp", opt.weights.w_cp);
  set_if("w_ps", opt.weights.w_ps);
  set_if("w_i", opt.weights.w_i);
  set_if("r_h", opt.weights.r_h);
  set_if("r_r", opt.weights.r_r);
  set_if("ps_variant", opt.ps_variant);
}

struct MissingPrerequisite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_input(const std::string& path, const std::string& what) {
  if (path.empty())
    throw MissingPrerequisite(what + " is required but was not given");
  if (!fs::exists(path))
    throw MissingPrerequisite(what + " not found: " + path);
}

double corpus_mean_min_distance(const std::vector<Rollout>& rollouts) {
  double sum = 0.0;
  long n = 0;
  for (const Rollout& r : rollouts) {
    const AgentTrace* robot = r.robot();
    if (!robot) continue;
    for (int t = 0; t < r.length(); ++t) {
      double best = std::numeric_limits<double>::infinity();
      for (const AgentTrace* p : r.pedestrians())
        best = std::min(best, (p->pos[t] - robot->pos[t]).norm());
      if (std::isfinite(best)) {
        sum += best;
        ++n;
      }
    }
  }
  return n ? sum / n : 0.0;
}

// --- Commands ---------------------------------------------------------------

int cmd_gen_data(const CommonOptions& opt, int scenarios, const std::string& out) {
  if (scenarios < 1) throw CLI::ValidationError("--scenarios", "must be >= 1");
  DirLock lock(out);
  SocialForceParams params;
  auto rollouts = generate_dataset(scenarios, opt.seed, params, opt.dt);
  write_scenario_csv(out, rollouts);
  std::printf("gen-data: %d scenarios, %d steps each -> %s\n", scenarios,
              rollouts.front().length(), out.c_str());
  std::printf("gen-data: mean min robot-pedestrian distance %.3f m\n",
              corpus_mean_min_distance(rollouts));
  return kExitOk;
}

int cmd_train_predictor(const CommonOptions& opt, const std::string& sim_path,
                        const std::string& real_path, const std::string& out,
                        const std::string& curve, int stride, int steps_per_epoch) {
  require_input(sim_path, "--sim corpus");
  if (!real_path.empty()) require_input(real_path, "--real corpus");
  DirLock lock(out);

  PredictorConfig pcfg;
  pcfg.dt = opt.dt;
  auto sim_rollouts = read_scenario_csv(sim_path);
  SampleSet sim = build_predictor_samples(sim_rollouts, pcfg, stride);
  SampleSet real;
  if (!real_path.empty()) {
    auto real_rollouts = read_scenario_csv(real_path);
    real = build_predictor_samples(real_rollouts, pcfg, std::max(1, stride / 2));
  }
  if (sim.empty() || (!real_path.empty() && real.empty()))
    throw std::runtime_error("train-predictor: no usable samples in the corpus");

  PredictorTrainConfig tc;
  tc.epochs = opt.epochs;
  tc.batch = opt.batch;
  tc.lr = opt.lr;
  tc.seed = opt.seed;
  tc.curve_path = curve;
  tc.max_steps_per_epoch = steps_per_epoch;

  PredictorNet net = real_path.empty() ? train_predictor(sim, sim, tc, pcfg)
                                       : train_predictor(real, sim, tc, pcfg);
  net.save(out);
  PredictorEval ev = eval_predictor(net, real_path.empty() ? sim : real);
  std::printf("train-predictor: %zu sim + %zu real samples -> %s\n", sim.size(),
              real.size(), out.c_str());
  std::printf("train-predictor: in-corpus mse %.5f cosine %.3f\n", ev.mse, ev.cosine);
  return kExitOk;
}

int cmd_train_policy(const CommonOptions& opt, const std::string& mode_name,
                     const std::string& corpus_path, const std::string& predictor_path,
                     const std::string& out, const std::string& curve,
                     int steps_per_epoch) {
  PolicyMode mode;
  if (mode_name == "social")
    mode = PolicyMode::kSocial;
  else if (mode_name == "collect")
    mode = PolicyMode::kCollect;
  else
    throw CLI::ValidationError("--mode", "must be social or collect");

  require_input(corpus_path, "--corpus");
  std::optional<PredictorNet> predictor;
  if (mode == PolicyMode::kSocial) {
    require_input(predictor_path, "--predictor (required in social mode)");
    predictor = PredictorNet::load(predictor_path);
  } else if (!predictor_path.empty()) {
    require_input(predictor_path, "--predictor");
    predictor = PredictorNet::load(predictor_path);
  }
  DirLock lock(out);

  PolicyCorpus corpus = load_policy_corpus(corpus_path);
  PolicyConfig cfg;
  cfg.dt = opt.dt;
  PolicyTrainConfig tc;
  tc.epochs = opt.epochs;
  tc.batch = opt.batch;
  tc.lr = opt.lr;
  tc.seed = opt.seed;
  tc.curve_path = curve;
  tc.steps_per_epoch = steps_per_epoch;

  ObjectiveWeights weights = opt.weights;
  weights.ps_variant = parse_ps_variant(opt.ps_variant);

  PolicyNet net = train_policy(mode, predictor ? &*predictor : nullptr, corpus, tc,
                               weights, cfg);
  net.save(out);
  std::printf("train-policy: mode %s on %zu rollouts -> %s\n", mode_name.c_str(),
              corpus.size(), out.c_str());
  return kExitOk;
}

int cmd_collect(const CommonOptions& opt, const std::string& policy_path, int episodes,
                const std::string& out, const std::string& label, bool obstacles) {
  require_input(policy_path, "--policy");
  if (episodes < 0) throw CLI::ValidationError("--episodes", "must be >= 0");
  DirLock lock(out);

  PolicyNet policy = PolicyNet::load(policy_path);
  SuiteParams sp;
  sp.with_obstacles = obstacles;
  auto suite = make_episode_suite(episodes, opt.seed, sp);
  ObjectiveWeights weights = opt.weights;
  weights.ps_variant = parse_ps_variant(opt.ps_variant);
  PolicyCorpus corpus = collect_dataset(policy, suite, weights, out);

  std::vector<Rollout> rollouts;
  for (const auto& e : corpus) rollouts.push_back(e.rollout);
  const double mean_dist = corpus_mean_min_distance(rollouts);

  nlohmann::json summary;
  summary["label"] = label;
  summary["n_episodes"] = episodes;
  summary["mean_min_robot_ped_distance"] = mean_dist;
  std::ofstream sf(out + ".summary.json");
  sf << summary.dump(1) << "\n";
  std::printf("collect: %d episodes (%s) -> %s, mean min distance %.3f m\n", episodes,
              label.c_str(), out.c_str(), mean_dist);
  return kExitOk;
}

int cmd_eval(const CommonOptions& opt, const std::vector<std::string>& policy_paths,
             const std::string& predictor_path, int episodes, const std::string& out,
             bool compare, bool obstacles) {
  if (policy_paths.empty()) throw MissingPrerequisite("--policy is required");
  for (const auto& p : policy_paths) require_input(p, "--policy checkpoint");
  std::optional<PredictorNet> reference;
  if (!predictor_path.empty()) {
    require_input(predictor_path, "--predictor");
    reference = PredictorNet::load(predictor_path);
  }
  if (episodes < 1) throw CLI::ValidationError("--episodes", "must be >= 1");
  DirLock lock(out);

  std::vector<PolicyNet> nets;
  nets.reserve(policy_paths.size());
  for (const auto& p : policy_paths) nets.push_back(PolicyNet::load(p));

  SuiteParams sp;
  sp.with_obstacles = obstacles;
  auto suite = make_episode_suite(episodes, opt.seed, sp);
  ObjectiveWeights weights = opt.weights;
  weights.ps_variant = parse_ps_variant(opt.ps_variant);

  if (policy_paths.size() == 1 && !compare) {
    std::vector<EpisodeResult> results;
    for (const auto& cfg : suite)
      results.push_back(run_episode(nets[0], reference ? &*reference : nullptr, cfg,
                                    weights));
    MetricsReport rep = compute_metrics(results, suite, weights, nets[0].config().v_max);
    write_metrics_json(out, "eval", results, rep);
    std::printf("eval: GR %.3f SPL %.3f STL %.3f CP %d CO %d PSV %.1f s -> %s\n", rep.gr,
                rep.spl, rep.stl, rep.cp, rep.co, rep.psv, out.c_str());
  } else {
    std::vector<std::pair<std::string, PolicyNet*>> labeled;
    for (size_t i = 0; i < nets.size(); ++i)
      labeled.push_back({fs::path(policy_paths[i]).stem().string(), &nets[i]});
    ComparisonTable table =
        ablation_compare(labeled, suite, reference ? &*reference : nullptr, weights);
    write_comparison_json(out, suite, table);
    for (const auto& row : table.rows)
      std::printf("eval[%s]: GR %.3f SPL %.3f STL %.3f CP %d CO %d PSV %.1f s CPpert %.5f\n",
                  row.label.c_str(), row.report.gr, row.report.spl, row.report.stl,
                  row.report.cp, row.report.co, row.report.psv,
                  row.mean_cp_perturbation);
    std::printf("eval: comparison -> %s\n", out.c_str());
  }
  return kExitOk;
}

int cmd_continual(const CommonOptions& opt, int days, const std::string& policy_path,
                  const std::string& out, int episodes_per_day, int finetune_steps) {
  if (days < 2) throw CLI::ValidationError("--days", "must be >= 2");
  DirLock lock(out);

  PolicyConfig cfg;
  cfg.dt = opt.dt;
  PolicyNet policy;
  if (!policy_path.empty()) {
    require_input(policy_path, "--policy");
    policy = PolicyNet::load(policy_path);
  } else {
    // Self-contained base policy: a short navigation-only training run on a
    // freshly generated open-space corpus.
    SocialForceParams sf;
    PolicyCorpus corpus =
        corpus_from_rollouts(generate_dataset(150, splitmix64(opt.seed ^ 0xba5eull), sf));
    PolicyTrainConfig tc;
    tc.epochs = 6;
    tc.steps_per_epoch = 40;
    tc.batch = opt.batch;
    tc.lr = opt.lr;
    tc.seed = splitmix64(opt.seed ^ 0xbadull);
    ObjectiveWeights base_weights = opt.weights;
    base_weights.w_i = 0.0;
    policy = train_policy(PolicyMode::kCollect, nullptr, corpus, tc, base_weights, cfg);
  }

  ContinualParams params;
  params.weights = opt.weights;
  params.weights.ps_variant = parse_ps_variant(opt.ps_variant);
  params.finetune.epochs = 1;
  params.finetune.steps_per_epoch = finetune_steps;
  params.finetune.batch = opt.batch;
  params.finetune.lr = opt.lr;
  params.finetune.seed = splitmix64(opt.seed ^ 0xf17eull);
  params.rescue_log_path = out + ".rescue.jsonl";
  std::remove(params.rescue_log_path.c_str());

  auto schedule = default_day_schedule(days, opt.seed);
  for (auto& d : schedule) d.n_episodes = episodes_per_day;
  ContinualResult res = continual_loop(policy, schedule, params);
  write_intervention_csv(out, res);
  std::printf("continual: %d days -> %s\n", days, out.c_str());
  for (size_t d = 0; d < res.interventions_per_10min.size(); ++d)
    std::printf("  day %zu: %.2f interventions / 10 min (%d stuck)\n", d + 1,
                res.interventions_per_10min[d], res.stuck_counts[d]);
  return kExitOk;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error("config: expected `key = value` at line " +
                                 std::to_string(line_no));
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: empty key at line " + std::to_string(line_no));
    out[key] = value;
  }
  return out;
}

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"social navigation pipeline: simulation, training, evaluation"};
  app.require_subcommand(1);

  CommonOptions opt;

  auto* gen = app.add_subcommand("gen-data", "generate the social-force scenario corpus");
  int scenarios = 10000;
  std::string gen_out = "sf_corpus.csv";
  gen->add_option("--scenarios", scenarios, "number of scenarios (default 10000)");
  gen->add_option("--out", gen_out, "output CSV path");
  add_common(gen, opt);

  auto* trp = app.add_subcommand("train-predictor", "train the pedestrian predictor");
  std::string sim_path, real_path, trp_out = "predictor.json", trp_curve;
  int stride = 4, pred_steps = 200;
  trp->add_option("--sim", sim_path, "simulated corpus CSV (required)");
  trp->add_option("--real", real_path, "interaction corpus CSV (optional second source)");
  trp->add_option("--out", trp_out, "checkpoint output path");
  trp->add_option("--curve", trp_curve, "training-curve CSV output");
  trp->add_option("--stride", stride, "window stride when building samples (default 4)");
  trp->add_option("--steps-per-epoch", pred_steps, "max optimizer steps per epoch");
  add_common(trp, opt);

  auto* trpo = app.add_subcommand("train-policy", "train a navigation or collection policy");
  std::string mode = "social", corpus_path, predictor_path, trpo_out = "policy.json",
              trpo_curve;
  int policy_steps = 50;
  trpo->add_option("--mode", mode, "social | collect");
  trpo->add_option("--corpus", corpus_path, "training corpus CSV (required)");
  trpo->add_option("--predictor", predictor_path,
                   "frozen predictor checkpoint (required for social mode)");
  trpo->add_option("--out", trpo_out, "checkpoint output path");
  trpo->add_option("--curve", trpo_curve, "training-curve CSV output");
  trpo->add_option("--steps-per-epoch", policy_steps, "optimizer steps per epoch");
  add_common(trpo, opt);

  auto* col = app.add_subcommand("collect", "run collection episodes and export a corpus");
  std::string col_policy, col_out = "corpus.csv", col_label = "corpus";
  int col_episodes = 50;
  bool col_obstacles = true;
  col->add_option("--policy", col_policy, "collection policy checkpoint (required)");
  col->add_option("--episodes", col_episodes, "number of episodes (default 50)");
  col->add_option("--out", col_out, "corpus CSV output path");
  col->add_option("--label", col_label, "corpus tag (e.g. enriched | naive)");
  col->add_flag("--obstacles,!--no-obstacles", col_obstacles,
                "include static obstacles in the episodes");
  add_common(col, opt);

  auto* ev = app.add_subcommand("eval", "closed-loop evaluation / paired comparison");
  std::vector<std::string> ev_policies;
  std::string ev_predictor, ev_out = "report.json";
  int ev_episodes = 50;
  bool ev_compare = false, ev_obstacles = true;
  ev->add_option("--policy", ev_policies, "policy checkpoint (repeat to compare)");
  ev->add_option("--predictor", ev_predictor,
                 "frozen reference predictor for the perturbation metric");
  ev->add_option("--episodes", ev_episodes, "episodes per policy (default 50)");
  ev->add_option("--out", ev_out, "report JSON path");
  ev->add_flag("--compare", ev_compare, "force the paired comparison format");
  ev->add_flag("--obstacles,!--no-obstacles", ev_obstacles,
               "include static obstacles in the episodes");
  add_common(ev, opt);

  auto* cont = app.add_subcommand("continual", "multi-day deployment simulation");
  int days = 6, epd = 8, finetune_steps = 60;
  std::string cont_policy, cont_out = "interventions.csv";
  cont->add_option("--days", days, "number of simulated days (default 6)");
  cont->add_option("--policy", cont_policy,
                   "starting policy checkpoint (default: train a small base policy)");
  cont->add_option("--out", cont_out, "intervention curve CSV path");
  cont->add_option("--episodes-per-day", epd, "collection episodes per day (default 8)");
  cont->add_option("--finetune-steps", finetune_steps,
                   "optimizer steps in each nightly fine-tune (default 60)");
  add_common(cont, opt);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitFlags;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    apply_config(sub, opt);
    if (sub == gen) return cmd_gen_data(opt, scenarios, gen_out);
    if (sub == trp)
      return cmd_train_predictor(opt, sim_path, real_path, trp_out, trp_curve, stride,
                                 pred_steps);
    if (sub == trpo)
      return cmd_train_policy(opt, mode, corpus_path, predictor_path, trpo_out,
                              trpo_curve, policy_steps);
    if (sub == col)
      return cmd_collect(opt, col_policy, col_episodes, col_out, col_label, col_obstacles);
    if (sub == ev)
      return cmd_eval(opt, ev_policies, ev_predictor, ev_episodes, ev_out, ev_compare,
                      ev_obstacles);
    if (sub == cont)
      return cmd_continual(opt, days, cont_policy, cont_out, epd, finetune_steps);
    return kExitFlags;
  } catch (const MissingPrerequisite& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissing;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFlags;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFlags;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
}

}  // namespace socnav
