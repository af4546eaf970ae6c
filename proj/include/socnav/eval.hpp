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
//
// Closed-loop evaluation: the policy drives a unicycle robot among
// social-force pedestrians and static obstacles, with collision recovery,
// optional odometry drift with anchor relocalization, navigation metrics
// (GR/SPL/STL/CP/CO/PSV), paired ablation comparisons, and corpus export.

#ifndef SOCNAV_EVAL_HPP_
#define SOCNAV_EVAL_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "socnav/autonomy.hpp"
#include "socnav/map.hpp"
#include "socnav/policy.hpp"
#include "socnav/predictor.hpp"
#include "socnav/socialforce.hpp"

namespace socnav {

struct PedestrianConfig {
  Pose2 start;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
};

// Optional drifting-odometry localization: the policy's subgoal is computed
// in the believed frame, which accumulates per-step noise and snaps back
// whenever a route anchor is detected.
struct LocalizationSim {
  TopoGraph graph;
  AnchorRegistry registry;
  std::vector<Pose2> anchor_world;  // world pose per registered tag
  double odom_noise_sigma = 0.0;
  double detect_range = 2.0;
  int subgoal_lookahead = 3;  // nodes ahead of the estimate
};

struct EpisodeConfig {
  MapSpec map;
  Pose2 start;
  Pose2 goal;
  std::vector<PedestrianConfig> pedestrians;
  int max_steps = 240;
  double goal_tolerance = 0.5;
  double dt = 0.33;
  uint64_t seed = 0;
  double subgoal_lookahead = 2.0;  // carrot distance along the shortest path [m]
  std::optional<LocalizationSim> localization;
};

struct StepRecord {
  Pose2 robot;
  Twist cmd;
  std::vector<Eigen::Vector2d> ped_pos;
  std::vector<Eigen::Vector2d> ped_vel;
  double min_ped_dist = std::numeric_limits<double>::infinity();
  bool contact_ped = false;
  bool contact_obs = false;
};

struct EpisodeResult {
  bool success = false;
  bool stuck = false;
  double path_len = 0.0;
  double time_s = 0.0;
  int cp = 0;  // debounced pedestrian contacts
  int co = 0;  // debounced static-obstacle contacts
  double psv = 0.0;
  double mean_cp_perturbation = 0.0;
  uint64_t seed = 0;
  std::vector<StepRecord> history;
  std::vector<RescueEvent> rescues;
};

struct MetricsReport {
  double gr = 0.0;
  double spl = 0.0;
  double stl = 0.0;
  int cp = 0;
  int co = 0;
  double psv = 0.0;
};

// Shortest collision-free path among the inflated obstacles (visibility
// graph over sampled boundary vertices); straight-line distance when clear.
double shortest_path_length(const MapSpec& map, const Eigen::Vector2d& start,
                            const Eigen::Vector2d& goal, double inflation);

// Runs one closed-loop episode. Only (v1, omega1) of each policy query is
// executed. `reference` (optional) scores the counterfactual perturbation of
// the executed trajectory; pass the same frozen model across compared
// policies.
EpisodeResult run_episode(PolicyNet& policy, PredictorNet* reference,
                          const EpisodeConfig& config, const ObjectiveWeights& weights,
                          const SocialForceParams& sf_params = {});

// Aggregates results; PSV is recomputed from the recorded distances with the
// given radii so personal-space sweeps reuse stored histories.
MetricsReport compute_metrics(const std::vector<EpisodeResult>& results,
                              const std::vector<EpisodeConfig>& configs,
                              const ObjectiveWeights& weights, double v_max);

struct ComparisonRow {
  std::string label;
  MetricsReport report;
  double mean_cp_perturbation = 0.0;
  std::vector<EpisodeResult> results;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

// Paired-seed comparison: every policy runs the identical config list.
ComparisonTable ablation_compare(
    const std::vector<std::pair<std::string, PolicyNet*>>& policies,
    const std::vector<EpisodeConfig>& configs, PredictorNet* reference,
    const ObjectiveWeights& weights, const SocialForceParams& sf_params = {});

void write_metrics_json(const std::string& path, const std::string& suite,
                        const std::vector<EpisodeResult>& results,
                        const MetricsReport& aggregate);
void write_comparison_json(const std::string& path,
                           const std::vector<EpisodeConfig>& configs,
                           const ComparisonTable& table);

// Seeded interaction-heavy episode suite: 8-20 m goals, 1-3 crossing
// pedestrians timed to meet the robot, optional flanking obstacles.
struct SuiteParams {
  double min_goal_dist = 8.0;
  double max_goal_dist = 20.0;
  int min_peds = 1;
  int max_peds = 3;
  int max_obstacles = 3;
  bool with_obstacles = true;
};
std::vector<EpisodeConfig> make_episode_suite(int n, uint64_t seed,
                                              const SuiteParams& params = {});

// Runs collection episodes under the given policy and exports every
// robot/pedestrian track as a scenario corpus (CSV plus obstacle sidecar
// when a path is given). Returns the corpus for in-process reuse.
PolicyCorpus collect_dataset(PolicyNet& policy, const std::vector<EpisodeConfig>& configs,
                             const ObjectiveWeights& weights,
                             const std::string& csv_path = "",
                             const SocialForceParams& sf_params = {});

// Episode traces as a rollout (robot + pedestrians), usable as corpus data.
Rollout episode_to_rollout(const EpisodeResult& result, const EpisodeConfig& config,
                           long scenario_id);

// Mean counterfactual perturbation of an executed trajectory under the
// reference predictor; also used for the per-episode metric.
double trajectory_cp_perturbation(PredictorNet& reference, const Rollout& rollout);

}  // namespace socnav

#endif  // SOCNAV_EVAL_HPP_
