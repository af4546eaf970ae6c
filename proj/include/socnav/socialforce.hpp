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
// Social-force pedestrian/robot dynamics and the open-space scenario
// generator that produces the simulated training corpus.

#ifndef SOCNAV_SOCIALFORCE_HPP_
#define SOCNAV_SOCIALFORCE_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "socnav/se2.hpp"

namespace socnav {

enum class AgentKind { kPedestrian, kRobot };

struct SocialForceParams {
  double tau = 0.5;            // relaxation time [s]
  double repulsion_a = 2.1;    // repulsion strength
  double repulsion_b = 0.3;    // repulsion range [m]
  double ped_nominal = 0.8;    // nominal pedestrian speed [m/s]
  double robot_nominal = 0.3;  // nominal robot speed [m/s]
  double max_speed_factor = 1.3;  // per-agent cap = factor * nominal
  double ped_radius = 0.2;     // body radii entering the repulsion term
  double robot_radius = 0.25;
  double goal_stop_radius = 0.3;  // within this of the goal, desired velocity is zero

  double nominal(AgentKind k) const {
    return k == AgentKind::kRobot ? robot_nominal : ped_nominal;
  }
  double max_speed(AgentKind k) const { return max_speed_factor * nominal(k); }
  double radius(AgentKind k) const {
    return k == AgentKind::kRobot ? robot_radius : ped_radius;
  }
  void validate() const;
};

struct AgentState {
  Eigen::Vector2d pos = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
};

struct ScenarioAgent {
  int id = 0;
  AgentKind kind = AgentKind::kPedestrian;
  Pose2 start;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
};

// One generated interaction scenario: a robot on a 2.0 m circle and a
// pedestrian on a 5.3 m circle, goals at the antipodes, robot goal shortened.
struct Scenario {
  long scenario_id = 0;
  std::vector<ScenarioAgent> agents;
  int n_steps = 80;
  double dt = 0.33;
  uint64_t seed = 0;
};

struct AgentTrace {
  int id = 0;
  AgentKind kind = AgentKind::kPedestrian;
  std::vector<Eigen::Vector2d> pos;
  std::vector<Eigen::Vector2d> vel;
  std::vector<double> theta;  // heading from velocity, held when stationary

  Pose2 pose_at(int t) const { return {pos[t].x(), pos[t].y(), theta[t]}; }
  int length() const { return static_cast<int>(pos.size()); }
};

struct Rollout {
  long scenario_id = 0;
  double dt = 0.33;
  std::vector<AgentTrace> agents;

  const AgentTrace* robot() const;
  std::vector<const AgentTrace*> pedestrians() const;
  int length() const { return agents.empty() ? 0 : agents.front().length(); }
};

// One Euler step of the social-force dynamics: relaxation toward the desired
// velocity plus pairwise exponential repulsion, speed capped per agent.
// Desired velocity is zero within goal_stop_radius of the goal.
std::vector<AgentState> step_social_force(const std::vector<AgentState>& states,
                                          const std::vector<ScenarioAgent>& agents,
                                          const SocialForceParams& params,
                                          double dt);

// Deterministic scenario from a seed (circle placements, antipodal goals,
// robot goal shortened by a uniform [0.5, 1.0] fraction of the full chord).
Scenario generate_scenario(uint64_t seed, const SocialForceParams& params,
                           double dt = 0.33, int n_steps = 80);

// Runs the scenario for n_steps; trace index 0 is the initial state.
Rollout rollout_scenario(const Scenario& scenario, const SocialForceParams& params);

// n independent rollouts with per-scenario derived seeds.
std::vector<Rollout> generate_dataset(int n, uint64_t seed,
                                      const SocialForceParams& params,
                                      double dt = 0.33, int n_steps = 80);

// Scenario CSV: header `scenario_id,step,agent_id,kind,x,y,theta,vx,vy`,
// one row per (scenario, step, agent). Also the import surface for
// externally collected trajectory corpora.
void write_scenario_csv(const std::string& path, const std::vector<Rollout>& rollouts);
std::vector<Rollout> read_scenario_csv(const std::string& path);

}  // namespace socnav

#endif  // SOCNAV_SOCIALFORCE_HPP_
