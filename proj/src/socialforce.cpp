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

#include "socnav/socialforce.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "socnav/rng.hpp"

namespace socnav {

namespace {
constexpr double kRobotCircleRadius = 2.0;
constexpr double kPedCircleRadius = 5.3;  // (0.8 / 0.3) * 2.0
constexpr double kHeadingSpeedFloor = 0.05;  // below this, hold the last heading
}  // namespace

void SocialForceParams::validate() const {
  if (tau <= 0.0 || repulsion_b <= 0.0 || repulsion_a < 0.0)
    throw std::invalid_argument("SocialForceParams: tau, B must be > 0 and A >= 0");
  if (ped_nominal <= 0.0 || robot_nominal <= 0.0 || max_speed_factor <= 0.0)
    throw std::invalid_argument("SocialForceParams: speeds must be > 0");
}

const AgentTrace* Rollout::robot() const {
  for (const AgentTrace& a : agents)
    if (a.kind == AgentKind::kRobot) return &a;
  return nullptr;
}

std::vector<const AgentTrace*> Rollout::pedestrians() const {
  std::vector<const AgentTrace*> out;
  for (const AgentTrace& a : agents)
    if (a.kind == AgentKind::kPedestrian) out.push_back(&a);
  return out;
}

std::vector<AgentState> step_social_force(const std::vector<AgentState>& states,
                                          const std::vector<ScenarioAgent>& agents,
                                          const SocialForceParams& params,
                                          double dt) {
  if (states.size() != agents.size())
    throw std::invalid_argument("step_social_force: states/agents size mismatch");
  for (const AgentState& s : states)
    if (!s.pos.allFinite() || !s.vel.allFinite())
      throw std::invalid_argument("step_social_force: non-finite state");

  const size_t n = states.size();
  std::vector<AgentState> next(n);
  for (size_t i = 0; i < n; ++i) {
    const AgentState& s = states[i];
    const ScenarioAgent& a = agents[i];

    Eigen::Vector2d to_goal = a.goal - s.pos;
    const double dist_goal = to_goal.norm();
    Eigen::Vector2d v_desired = Eigen::Vector2d::Zero();
    if (dist_goal > params.goal_stop_radius)
      v_desired = params.nominal(a.kind) * to_goal / dist_goal;

    Eigen::Vector2d accel = (v_desired - s.vel) / params.tau;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      Eigen::Vector2d sep = s.pos - states[j].pos;
      const double d = sep.norm();
      if (d < 1e-12) continue;  // coincident agents exert no defined direction
      const double r_sum = params.radius(a.kind) + params.radius(agents[j].kind);
      accel += params.repulsion_a * std::exp((r_sum - d) / params.repulsion_b) * sep / d;
    }

    Eigen::Vector2d vel = s.vel + accel * dt;
    const double speed = vel.norm();
    const double cap = params.max_speed(a.kind);
    if (speed > cap) vel *= cap / speed;
    next[i].vel = vel;
    next[i].pos = s.pos + vel * dt;
  }
  return next;
}

Scenario generate_scenario(uint64_t seed, const SocialForceParams& params,
                           double dt, int n_steps) {
  params.validate();
  Rng rng(seed);
  Scenario sc;
  sc.seed = seed;
  sc.dt = dt;
  sc.n_steps = n_steps;

  const double robot_angle = rng.uniform(0.0, 2.0 * M_PI);
  const double ped_angle = rng.uniform(0.0, 2.0 * M_PI);
  const double shorten = rng.uniform(0.5, 1.0);  // fraction of the full chord

  Eigen::Vector2d robot_start(kRobotCircleRadius * std::cos(robot_angle),
                              kRobotCircleRadius * std::sin(robot_angle));
  Eigen::Vector2d ped_start(kPedCircleRadius * std::cos(ped_angle),
                            kPedCircleRadius * std::sin(ped_angle));
  Eigen::Vector2d robot_antipode = -robot_start;
  Eigen::Vector2d ped_goal = -ped_start;
  Eigen::Vector2d robot_goal = robot_start + shorten * (robot_antipode - robot_start);

  ScenarioAgent robot;
  robot.id = 0;
  robot.kind = AgentKind::kRobot;
  robot.goal = robot_goal;
  const Eigen::Vector2d rdir = (robot_goal - robot_start).normalized();
  robot.start = {robot_start.x(), robot_start.y(), std::atan2(rdir.y(), rdir.x())};

  ScenarioAgent ped;
  ped.id = 1;
  ped.kind = AgentKind::kPedestrian;
  ped.goal = ped_goal;
  const Eigen::Vector2d pdir = (ped_goal - ped_start).normalized();
  ped.start = {ped_start.x(), ped_start.y(), std::atan2(pdir.y(), pdir.x())};

  sc.agents = {robot, ped};
  return sc;
}

Rollout rollout_scenario(const Scenario& scenario, const SocialForceParams& params) {
  params.validate();
  if (scenario.n_steps < 1 || scenario.dt <= 0.0)
    throw std::invalid_argument("rollout_scenario: need n_steps >= 1 and dt > 0");

  const size_t n = scenario.agents.size();
  Rollout out;
  out.scenario_id = scenario.scenario_id;
  out.dt = scenario.dt;
  out.agents.resize(n);

  std::vector<AgentState> states(n);
  for (size_t i = 0; i < n; ++i) {
    const ScenarioAgent& a = scenario.agents[i];
    states[i].pos = {a.start.x, a.start.y};
    // Initial velocity at nominal speed toward the goal (zero if already there).
    Eigen::Vector2d to_goal = a.goal - states[i].pos;
    const double d = to_goal.norm();
    if (d > params.goal_stop_radius)
      states[i].vel = params.nominal(a.kind) * to_goal / d;
    out.agents[i].id = a.id;
    out.agents[i].kind = a.kind;
    out.agents[i].pos.reserve(scenario.n_steps);
    out.agents[i].vel.reserve(scenario.n_steps);
    out.agents[i].theta.reserve(scenario.n_steps);
  }

  auto record = [&](const std::vector<AgentState>& st) {
    for (size_t i = 0; i < n; ++i) {
      AgentTrace& tr = out.agents[i];
      tr.pos.push_back(st[i].pos);
      tr.vel.push_back(st[i].vel);
      double heading;
      if (st[i].vel.norm() > kHeadingSpeedFloor)
        heading = std::atan2(st[i].vel.y(), st[i].vel.x());
      else
        heading = tr.theta.empty() ? scenario.agents[i].start.theta : tr.theta.back();
      tr.theta.push_back(heading);
    }
  };

  record(states);
  for (int step = 1; step < scenario.n_steps; ++step) {
    states = step_social_force(states, scenario.agents, params, scenario.dt);
    record(states);
  }
  return out;
}

std::vector<Rollout> generate_dataset(int n, uint64_t seed,
                                      const SocialForceParams& params,
                                      double dt, int n_steps) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  std::vector<Rollout> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const uint64_t sc_seed = splitmix64(seed ^ (0xd1b54a32d192ed03ull + static_cast<uint64_t>(i)));
    Scenario sc = generate_scenario(sc_seed, params, dt, n_steps);
    sc.scenario_id = i;
    out.push_back(rollout_scenario(sc, params));
  }
  return out;
}

void write_scenario_csv(const std::string& path, const std::vector<Rollout>& rollouts) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_scenario_csv: cannot open " + path);
  std::fputs("scenario_id,step,agent_id,kind,x,y,theta,vx,vy\n", f);
  char buf[256];
  for (const Rollout& r : rollouts) {
    for (int t = 0; t < r.length(); ++t) {
      for (const AgentTrace& a : r.agents) {
        const char* kind = a.kind == AgentKind::kRobot ? "robot" : "ped";
        std::snprintf(buf, sizeof(buf), "%ld,%d,%d,%s,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      r.scenario_id, t, a.id, kind, a.pos[t].x(), a.pos[t].y(),
                      a.theta[t], a.vel[t].x(), a.vel[t].y());
        std::fputs(buf, f);
      }
    }
  }
  if (std::ferror(f)) {
    std::fclose(f);
    throw std::runtime_error("write_scenario_csv: write failed: " + path);
  }
  std::fclose(f);
}

std::vector<Rollout> read_scenario_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_scenario_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("read_scenario_csv: empty file " + path);
  if (line.rfind("scenario_id,step,agent_id,kind", 0) != 0)
    throw std::runtime_error("read_scenario_csv: unexpected header in " + path);

  // scenario_id -> agent_id -> trace, preserving first-seen order.
  std::map<long, std::map<int, AgentTrace>> table;
  std::vector<long> scenario_order;
  long line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    long sid;
    int step, aid;
    char kind[16];
    double x, y, theta, vx, vy;
    const int got = std::sscanf(line.c_str(), "%ld,%d,%d,%15[^,],%lf,%lf,%lf,%lf,%lf",
                                &sid, &step, &aid, kind, &x, &y, &theta, &vx, &vy);
    if (got != 9)
      throw std::runtime_error("read_scenario_csv: bad row at line " +
                               std::to_string(line_no) + " in " + path);
    auto it = table.find(sid);
    if (it == table.end()) {
      scenario_order.push_back(sid);
      it = table.emplace(sid, std::map<int, AgentTrace>{}).first;
    }
    AgentTrace& tr = it->second[aid];
    tr.id = aid;
    tr.kind = std::strcmp(kind, "robot") == 0 ? AgentKind::kRobot : AgentKind::kPedestrian;
    tr.pos.emplace_back(x, y);
    tr.vel.emplace_back(vx, vy);
    tr.theta.push_back(theta);
  }

  std::vector<Rollout> out;
  out.reserve(scenario_order.size());
  for (long sid : scenario_order) {
    Rollout r;
    r.scenario_id = sid;
    for (auto& [aid, tr] : table[sid]) r.agents.push_back(std::move(tr));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace socnav
