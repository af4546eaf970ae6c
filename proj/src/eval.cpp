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

#include "socnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <queue>
#include <stdexcept>

#include "json.hpp"
#include "socnav/rng.hpp"

namespace socnav {

using tinynet::Matrix;
using tinynet::Mode;

// --- Shortest path ----------------------------------------------------------

namespace {

double segment_segment_distance(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                                const Eigen::Vector2d& q1, const Eigen::Vector2d& q2) {
  auto orient = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                   const Eigen::Vector2d& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  };
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return 0.0;  // proper intersection
  return std::min(std::min(point_segment_distance(p1, q1, q2),
                           point_segment_distance(p2, q1, q2)),
                  std::min(point_segment_distance(q1, p1, p2),
                           point_segment_distance(q2, p1, p2)));
}

bool segment_clear(const MapSpec& map, const Eigen::Vector2d& p,
                   const Eigen::Vector2d& q, double inflation) {
  for (const Circle& c : map.circles)
    if (point_segment_distance(c.center, p, q) <= c.radius + inflation - 1e-9)
      return false;
  for (const Wall& w : map.walls)
    if (segment_segment_distance(p, q, w.a, w.b) <= inflation - 1e-9) return false;
  return true;
}

bool point_clear(const MapSpec& map, const Eigen::Vector2d& p, double inflation) {
  for (const Circle& c : map.circles)
    if ((p - c.center).norm() <= c.radius + inflation - 1e-9) return false;
  for (const Wall& w : map.walls)
    if (point_segment_distance(p, w.a, w.b) <= inflation - 1e-9) return false;
  return true;
}

std::vector<Eigen::Vector2d> boundary_samples(const MapSpec& map, double inflation) {
  std::vector<Eigen::Vector2d> pts;
  constexpr double kMargin = 0.02;
  for (const Circle& c : map.circles) {
    const double rho = c.radius + inflation + kMargin;
    for (int k = 0; k < 40; ++k) {
      const double a = 2.0 * M_PI * k / 40;
      pts.emplace_back(c.center + rho * Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  }
  for (const Wall& w : map.walls) {
    const double rho = inflation + kMargin;
    Eigen::Vector2d d = w.b - w.a;
    const double len = d.norm();
    if (len < 1e-12) continue;
    d /= len;
    const Eigen::Vector2d n(-d.y(), d.x());
    for (int k = 0; k < 16; ++k) {  // full rings at both tips; inside points
      const double a = 2.0 * M_PI * k / 16.0;  // are filtered by point_clear
      const Eigen::Vector2d ring(std::cos(a), std::sin(a));
      pts.emplace_back(w.a + rho * ring);
      pts.emplace_back(w.b + rho * ring);
    }
    for (double t : {0.2, 0.4, 0.6, 0.8}) {
      pts.emplace_back(w.a + t * (w.b - w.a) + rho * n);
      pts.emplace_back(w.a + t * (w.b - w.a) - rho * n);
    }
  }
  return pts;
}

std::vector<Eigen::Vector2d> plan_shortest_path(const MapSpec& map,
                                                const Eigen::Vector2d& start,
                                                const Eigen::Vector2d& goal,
                                                double inflation) {
  if (segment_clear(map, start, goal, inflation)) return {start, goal};

  std::vector<Eigen::Vector2d> verts{start, goal};
  for (const auto& p : boundary_samples(map, inflation))
    if (point_clear(map, p, inflation)) verts.push_back(p);

  const size_t n = verts.size();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (segment_clear(map, verts[i], verts[j], inflation)) {
        const double w = (verts[i] - verts[j]).norm();
        adj[i].push_back({static_cast<int>(j), w});
        adj[j].push_back({static_cast<int>(i), w});
      }
    }
  }

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[0] = 0.0;
  heap.push({0.0, 0});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u] + 1e-12) continue;
    if (u == 1) break;
    for (auto [v, w] : adj[u]) {
      if (dist[u] + w < dist[v] - 1e-12) {
        dist[v] = dist[u] + w;
        prev[v] = u;
        heap.push({dist[v], v});
      }
    }
  }
  if (!std::isfinite(dist[1])) return {start, goal};  // no route: fall back

  std::vector<Eigen::Vector2d> path;
  for (int v = 1; v != -1; v = prev[v]) path.push_back(verts[v]);
  std::reverse(path.begin(), path.end());
  return path;
}

double polyline_length(const std::vector<Eigen::Vector2d>& path) {
  double len = 0.0;
  for (size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

}  // namespace

double shortest_path_length(const MapSpec& map, const Eigen::Vector2d& start,
                            const Eigen::Vector2d& goal, double inflation) {
  return polyline_length(plan_shortest_path(map, start, goal, inflation));
}

// --- Episode ----------------------------------------------------------------

namespace {

// Carrot point `lookahead` meters further along the path than the closest
// point to `pos`, plus the local path direction.
std::pair<Eigen::Vector2d, double> path_carrot(const std::vector<Eigen::Vector2d>& path,
                                               const Eigen::Vector2d& pos,
                                               double lookahead) {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double acc = 0.0;
  for (size_t i = 1; i < path.size(); ++i) {
    const Eigen::Vector2d seg = path[i] - path[i - 1];
    const double len = seg.norm();
    if (len < 1e-12) continue;
    const double t = std::clamp((pos - path[i - 1]).dot(seg) / (len * len), 0.0, 1.0);
    const double d = (pos - (path[i - 1] + t * seg)).norm();
    if (d < best_d) {
      best_d = d;
      best_s = acc + t * len;
    }
    acc += len;
  }
  double target_s = best_s + lookahead;
  acc = 0.0;
  for (size_t i = 1; i < path.size(); ++i) {
    const Eigen::Vector2d seg = path[i] - path[i - 1];
    const double len = seg.norm();
    if (acc + len >= target_s && len > 1e-12) {
      const double t = (target_s - acc) / len;
      return {path[i - 1] + t * seg, std::atan2(seg.y(), seg.x())};
    }
    acc += len;
  }
  const Eigen::Vector2d seg = path.back() - path[path.size() - 2];
  return {path.back(), std::atan2(seg.y(), seg.x())};
}

struct ContactInfo {
  bool ped = false;
  bool obs = false;
  BumperSide side = BumperSide::kNone;
};

ContactInfo detect_contacts(const MapSpec& map, const Pose2& robot,
                            const std::vector<AgentState>& peds, double r_r,
                            double ped_radius) {
  ContactInfo info;
  const Eigen::Vector2d rp(robot.x, robot.y);
  Eigen::Vector2d contact_pt = Eigen::Vector2d::Zero();
  double best = std::numeric_limits<double>::infinity();
  for (const AgentState& p : peds) {
    const double gap = (p.pos - rp).norm() - (r_r + ped_radius);
    if (gap < 0.0 && gap < best) {
      best = gap;
      info.ped = true;
      contact_pt = p.pos;
    }
  }
  if (!info.ped) {
    for (const Circle& c : map.circles) {
      const double gap = (rp - c.center).norm() - c.radius - r_r;
      if (gap < 0.0 && gap < best) {
        best = gap;
        info.obs = true;
        const Eigen::Vector2d dir = (rp - c.center).normalized();
        contact_pt = c.center + c.radius * dir;
      }
    }
    for (const Wall& w : map.walls) {
      const double gap = point_segment_distance(rp, w.a, w.b) - r_r;
      if (gap < 0.0 && gap < best) {
        best = gap;
        info.obs = true;
        const Eigen::Vector2d ab = w.b - w.a;
        const double t = std::clamp((rp - w.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
        contact_pt = w.a + t * ab;
      }
    }
  }
  if (info.ped || info.obs) {
    const Eigen::Vector2d local = to_frame_point(contact_pt, robot);
    info.side = local.y() >= 0.0 ? BumperSide::kLeft : BumperSide::kRight;
  }
  return info;
}

}  // namespace

EpisodeResult run_episode(PolicyNet& policy, PredictorNet* reference,
                          const EpisodeConfig& config, const ObjectiveWeights& weights,
                          const SocialForceParams& sf_params) {
  const PolicyConfig& cfg = policy.config();
  const double dt = config.dt;
  EpisodeResult result;
  result.seed = config.seed;

  // Static route plan for the subgoal carrot.
  const std::vector<Eigen::Vector2d> route = plan_shortest_path(
      config.map, {config.start.x, config.start.y}, {config.goal.x, config.goal.y},
      weights.r_r);

  Pose2 robot = config.start;
  Pose2 believed = config.start;
  int node_estimate = 0;
  Rng odom_rng(splitmix64(config.seed ^ 0x0d0e77ull));

  // Pedestrian simulation state plus backfilled histories (constant-velocity
  // extrapolation backwards, matching how they would have walked in).
  std::vector<ScenarioAgent> sf_agents;
  std::vector<AgentState> peds(config.pedestrians.size());
  std::vector<std::deque<Eigen::Vector2d>> ped_hist(peds.size());
  std::vector<std::deque<double>> ped_speed_hist(peds.size());
  for (size_t i = 0; i < peds.size(); ++i) {
    const auto& pc = config.pedestrians[i];
    peds[i].pos = {pc.start.x, pc.start.y};
    Eigen::Vector2d to_goal = pc.goal - peds[i].pos;
    if (to_goal.norm() > sf_params.goal_stop_radius)
      peds[i].vel = sf_params.ped_nominal * to_goal.normalized();
    ScenarioAgent a;
    a.id = static_cast<int>(i) + 1;
    a.kind = AgentKind::kPedestrian;
    a.goal = pc.goal;
    sf_agents.push_back(a);
    for (int k = 7; k >= 0; --k) {
      ped_hist[i].push_back(peds[i].pos - k * dt * peds[i].vel);
      ped_speed_hist[i].push_back(peds[i].vel.norm());
    }
  }
  ScenarioAgent robot_agent;  // repulsion source for the pedestrians
  robot_agent.id = 0;
  robot_agent.kind = AgentKind::kRobot;
  robot_agent.goal = {config.goal.x, config.goal.y};
  sf_agents.push_back(robot_agent);

  std::deque<Eigen::Vector2d> odom_hist;
  for (int k = 0; k <= cfg.n_p; ++k) odom_hist.emplace_back(robot.x, robot.y);

  auto record_state = [&](const Twist& cmd, const ContactInfo& contact) {
    StepRecord rec;
    rec.robot = robot;
    rec.cmd = cmd;
    for (const AgentState& p : peds) {
      rec.ped_pos.push_back(p.pos);
      rec.ped_vel.push_back(p.vel);
      rec.min_ped_dist =
          std::min(rec.min_ped_dist, (p.pos - Eigen::Vector2d(robot.x, robot.y)).norm());
    }
    rec.contact_ped = contact.ped;
    rec.contact_obs = contact.obs;
    result.history.push_back(std::move(rec));
  };
  record_state({}, {});

  RecoveryState recovery;
  std::deque<Twist> rescue_plan;
  bool prev_ped_contact = false, prev_obs_contact = false;

  for (int step = 0; step < config.max_steps; ++step) {
    // Subgoal: graph node in the believed frame, or the path carrot.
    PolicyObservation obs;
    if (config.localization) {
      const auto& loc = *config.localization;
      const int target =
          std::min(node_estimate + loc.subgoal_lookahead, loc.graph.size() - 1);
      obs.goal_rel = relative_pose(believed, loc.graph.nodes[target].pose);
    } else {
      auto [carrot, heading] = path_carrot(route, {robot.x, robot.y},
                                           config.subgoal_lookahead);
      const Pose2 carrot_pose{carrot.x(), carrot.y(),
                              (carrot - Eigen::Vector2d(config.goal.x, config.goal.y))
                                          .norm() < 1e-9
                                  ? config.goal.theta
                                  : heading};
      obs.goal_rel = relative_pose(robot, carrot_pose);
    }

    for (const auto& p : odom_hist) obs.odom_past.push_back(to_frame_point(p, robot));
    obs.rays = cast_rays(config.map, robot, cfg.n_rays, cfg.ray_cap);

    int nearest = -1;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < peds.size(); ++i) {
      double mean_speed = 0.0;
      for (double s : ped_speed_hist[i]) mean_speed += s;
      mean_speed /= ped_speed_hist[i].size();
      if (mean_speed <= 0.1) continue;
      const double d = (peds[i].pos - Eigen::Vector2d(robot.x, robot.y)).norm();
      if (d < nearest_d) {
        nearest_d = d;
        nearest = static_cast<int>(i);
      }
    }
    obs.ped_valid = nearest >= 0;
    if (obs.ped_valid)
      for (const auto& p : ped_hist[nearest]) obs.ped_past.push_back(to_frame_point(p, robot));
    else
      obs.ped_past.assign(8, Eigen::Vector2d::Zero());

    Twist cmd;
    if (!rescue_plan.empty()) {
      cmd = rescue_plan.front();
      rescue_plan.pop_front();
    } else {
      cmd = policy.forward(obs)[0];
    }

    // Advance the robot, then the pedestrians (robot acts as a repulsor).
    const Pose2 prev_pose = robot;
    std::vector<Twist> one{cmd};
    robot = integrate_unicycle(robot, one, dt)[0];
    result.path_len += std::hypot(robot.x - prev_pose.x, robot.y - prev_pose.y);

    std::vector<AgentState> all_states = peds;
    AgentState robot_state;
    robot_state.pos = {prev_pose.x, prev_pose.y};
    robot_state.vel = {cmd.v * std::cos(prev_pose.theta), cmd.v * std::sin(prev_pose.theta)};
    all_states.push_back(robot_state);
    std::vector<AgentState> stepped = step_social_force(all_states, sf_agents, sf_params, dt);
    for (size_t i = 0; i < peds.size(); ++i) peds[i] = stepped[i];

    // Believed pose: true relative motion plus odometry noise, anchor snaps.
    const Pose2 motion = relative_pose(prev_pose, robot);
    if (config.localization && config.localization->odom_noise_sigma > 0.0) {
      Pose2 noisy = motion;
      const double s = config.localization->odom_noise_sigma;
      noisy.x += odom_rng.normal(0.0, s);
      noisy.y += odom_rng.normal(0.0, s);
      noisy.theta = normalize_angle(noisy.theta + odom_rng.normal(0.0, 0.5 * s));
      believed = compose(believed, noisy);
    } else {
      believed = compose(believed, motion);
    }
    if (config.localization) {
      const auto& loc = *config.localization;
      // Advance the node estimate from believed progress.
      while (node_estimate + 1 < loc.graph.size()) {
        const Pose2& next = loc.graph.nodes[node_estimate + 1].pose;
        const Pose2 rel = relative_pose(believed, next);
        if (rel.x < 0.0)
          ++node_estimate;  // believed to be past the next node already
        else
          break;
      }
      for (size_t a = 0; a < loc.registry.tags.size(); ++a) {
        const Pose2& anchor_w = loc.anchor_world[a];
        const double d = std::hypot(anchor_w.x - robot.x, anchor_w.y - robot.y);
        if (d < loc.detect_range) {
          const Pose2 observed = relative_pose(robot, anchor_w);
          node_estimate = localize_with_anchor(
              node_estimate, {loc.registry.tags[a].n_ar, observed}, loc.registry);
          node_estimate = std::clamp(node_estimate, 0, loc.graph.size() - 1);
          believed = compose(anchor_w, inverse(observed));
          break;
        }
      }
    }

    // Contacts on the new state; rising edges count and trigger recovery.
    ContactInfo contact =
        detect_contacts(config.map, robot, peds, weights.r_r, sf_params.ped_radius);
    const bool ped_rising = contact.ped && !prev_ped_contact;
    const bool obs_rising = contact.obs && !prev_obs_contact;
    prev_ped_contact = contact.ped;
    prev_obs_contact = contact.obs;
    if (ped_rising) ++result.cp;
    if (obs_rising) ++result.co;

    // Histories.
    odom_hist.emplace_back(robot.x, robot.y);
    if (static_cast<int>(odom_hist.size()) > cfg.n_p + 1) odom_hist.pop_front();
    for (size_t i = 0; i < peds.size(); ++i) {
      ped_hist[i].push_back(peds[i].pos);
      ped_speed_hist[i].push_back(peds[i].vel.norm());
      if (ped_hist[i].size() > 8) ped_hist[i].pop_front();
      if (ped_speed_hist[i].size() > 8) ped_speed_hist[i].pop_front();
    }

    double min_ped = std::numeric_limits<double>::infinity();
    for (const AgentState& p : peds)
      min_ped = std::min(min_ped, (p.pos - Eigen::Vector2d(robot.x, robot.y)).norm());
    if (min_ped < weights.rh_rr()) result.psv += dt;

    record_state(cmd, contact);
    result.time_s = (step + 1) * dt;

    if (ped_rising || obs_rising) {
      auto [plan, next_state] = rescue_maneuver(
          recovery, robot, contact.side, (step + 1) * dt, dt);
      recovery = next_state;
      if (recovery.phase == RecoveryPhase::kStuck) {
        result.stuck = true;
        result.rescues.push_back({0, (step + 1) * dt, robot, recovery.collision_times});
        break;
      }
      rescue_plan.assign(plan.begin(), plan.end());
    }

    const double goal_d = std::hypot(robot.x - config.goal.x, robot.y - config.goal.y);
    if (goal_d <= config.goal_tolerance) {
      result.success = true;
      break;
    }
  }

  if (reference) {
    Rollout ro = episode_to_rollout(result, config, 0);
    result.mean_cp_perturbation = trajectory_cp_perturbation(*reference, ro);
  }
  return result;
}

Rollout episode_to_rollout(const EpisodeResult& result, const EpisodeConfig& config,
                           long scenario_id) {
  Rollout out;
  out.scenario_id = scenario_id;
  out.dt = config.dt;

  AgentTrace robot;
  robot.id = 0;
  robot.kind = AgentKind::kRobot;
  for (size_t t = 0; t < result.history.size(); ++t) {
    const Pose2& p = result.history[t].robot;
    robot.pos.emplace_back(p.x, p.y);
    robot.theta.push_back(p.theta);
    if (t == 0)
      robot.vel.emplace_back(0.0, 0.0);
    else
      robot.vel.push_back((robot.pos[t] - robot.pos[t - 1]) / config.dt);
  }
  out.agents.push_back(std::move(robot));

  for (size_t i = 0; i < config.pedestrians.size(); ++i) {
    AgentTrace ped;
    ped.id = static_cast<int>(i) + 1;
    ped.kind = AgentKind::kPedestrian;
    for (size_t t = 0; t < result.history.size(); ++t) {
      const auto& rec = result.history[t];
      ped.pos.push_back(rec.ped_pos[i]);
      ped.vel.push_back(rec.ped_vel[i]);
      const double speed = rec.ped_vel[i].norm();
      if (speed > 0.05)
        ped.theta.push_back(std::atan2(rec.ped_vel[i].y(), rec.ped_vel[i].x()));
      else
        ped.theta.push_back(ped.theta.empty() ? 0.0 : ped.theta.back());
    }
    out.agents.push_back(std::move(ped));
  }
  return out;
}

double trajectory_cp_perturbation(PredictorNet& reference, const Rollout& rollout) {
  const PredictorConfig& pc = reference.config();
  const int h = pc.horizon;
  const AgentTrace* robot = rollout.robot();
  if (!robot) return 0.0;
  const auto peds = rollout.pedestrians();
  if (peds.empty()) return 0.0;
  const int len = rollout.length();

  std::vector<Eigen::Matrix<double, 16, 1>> hps, rps, rfs;
  for (int t = h - 1; t + h < len; ++t) {
    const AgentTrace* best = nullptr;
    double best_d = 0.0;
    for (const AgentTrace* p : peds) {
      double mean_speed = 0.0;
      for (int k = t - (h - 1); k <= t; ++k) mean_speed += p->vel[k].norm();
      mean_speed /= h;
      if (mean_speed <= 0.1) continue;
      const double d = (p->pos[t] - robot->pos[t]).norm();
      if (!best || d < best_d) {
        best = p;
        best_d = d;
      }
    }
    if (!best) continue;
    const Pose2 frame = robot->pose_at(t);
    Eigen::Matrix<double, 16, 1> hp, rp, rf;
    for (int k = 0; k < h; ++k) {
      hp.segment<2>(2 * k) = to_frame_point(best->pos[t - (h - 1) + k], frame);
      rp.segment<2>(2 * k) = to_frame_point(robot->pos[t - (h - 1) + k], frame);
      rf.segment<2>(2 * k) = to_frame_point(robot->pos[t + 1 + k], frame);
    }
    hps.push_back(hp);
    rps.push_back(rp);
    rfs.push_back(rf);
  }
  if (hps.empty()) return 0.0;

  const long n = static_cast<long>(hps.size());
  Matrix hp(n, 2 * h), rp(n, 2 * h), rf(n, 2 * h);
  for (long i = 0; i < n; ++i) {
    hp.row(i) = hps[i].transpose();
    rp.row(i) = rps[i].transpose();
    rf.row(i) = rfs[i].transpose();
  }
  reference.set_mode(Mode::kEval);
  Matrix giveway = reference.predict_positions(hp, rp, Matrix::Zero(n, 2 * h));
  Matrix cond = reference.predict_positions(hp, rp, rf);
  return (giveway - cond).array().square().sum() / (n * h);
}

// --- Metrics ----------------------------------------------------------------

MetricsReport compute_metrics(const std::vector<EpisodeResult>& results,
                              const std::vector<EpisodeConfig>& configs,
                              const ObjectiveWeights& weights, double v_max) {
  if (results.empty()) throw std::invalid_argument("compute_metrics: no results");
  if (results.size() != configs.size())
    throw std::invalid_argument("compute_metrics: results/configs size mismatch");

  MetricsReport rep;
  for (size_t i = 0; i < results.size(); ++i) {
    const EpisodeResult& r = results[i];
    const EpisodeConfig& c = configs[i];
    const double li = shortest_path_length(c.map, {c.start.x, c.start.y},
                                           {c.goal.x, c.goal.y}, weights.r_r);
    const double s = r.success ? 1.0 : 0.0;
    rep.gr += s;
    if (r.success && li > 0.0) {
      rep.spl += li / std::max(r.path_len, li);
      const double t_star = li / v_max;
      rep.stl += t_star / std::max(r.time_s, t_star);
    }
    rep.cp += r.cp;
    rep.co += r.co;
    // PSV from the recorded distances, so radius sweeps reuse histories.
    for (size_t t = 1; t < r.history.size(); ++t)
      if (r.history[t].min_ped_dist < weights.rh_rr()) rep.psv += c.dt;
  }
  const double n = static_cast<double>(results.size());
  rep.gr /= n;
  rep.spl /= n;
  rep.stl /= n;
  return rep;
}

ComparisonTable ablation_compare(
    const std::vector<std::pair<std::string, PolicyNet*>>& policies,
    const std::vector<EpisodeConfig>& configs, PredictorNet* reference,
    const ObjectiveWeights& weights, const SocialForceParams& sf_params) {
  if (policies.size() < 2)
    throw std::invalid_argument("ablation_compare: need at least two policies");
  if (configs.empty()) throw std::invalid_argument("ablation_compare: no episodes");

  ComparisonTable table;
  for (const auto& [label, policy] : policies) {
    ComparisonRow row;
    row.label = label;
    double cp_sum = 0.0;
    for (const EpisodeConfig& c : configs) {
      EpisodeResult r = run_episode(*policy, reference, c, weights, sf_params);
      cp_sum += r.mean_cp_perturbation;
      row.results.push_back(std::move(r));
    }
    row.report = compute_metrics(row.results, configs, weights,
                                 policy->config().v_max);
    row.mean_cp_perturbation = cp_sum / static_cast<double>(configs.size());
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

nlohmann::json episode_json(const EpisodeResult& r) {
  return {{"seed", r.seed},
          {"success", r.success},
          {"path_len", r.path_len},
          {"time", r.time_s},
          {"cp", r.cp},
          {"co", r.co},
          {"psv", r.psv},
          {"mean_cp_perturbation", r.mean_cp_perturbation}};
}

nlohmann::json aggregate_json(const MetricsReport& m) {
  return {{"gr", m.gr},   {"spl", m.spl}, {"stl", m.stl},
          {"cp", m.cp},   {"co", m.co},   {"psv", m.psv}};
}

}  // namespace

void write_metrics_json(const std::string& path, const std::string& suite,
                        const std::vector<EpisodeResult>& results,
                        const MetricsReport& aggregate) {
  nlohmann::json j;
  j["suite"] = suite;
  j["n_episodes"] = results.size();
  j["per_episode"] = nlohmann::json::array();
  for (const EpisodeResult& r : results) j["per_episode"].push_back(episode_json(r));
  j["aggregate"] = aggregate_json(aggregate);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_metrics_json: cannot open " + path);
  f << j.dump(1) << "\n";
}

void write_comparison_json(const std::string& path,
                           const std::vector<EpisodeConfig>& configs,
                           const ComparisonTable& table) {
  nlohmann::json j;
  j["n_episodes"] = configs.size();
  j["policies"] = nlohmann::json::array();
  for (const ComparisonRow& row : table.rows) {
    nlohmann::json rj;
    rj["label"] = row.label;
    rj["aggregate"] = aggregate_json(row.report);
    rj["mean_cp_perturbation"] = row.mean_cp_perturbation;
    rj["per_episode"] = nlohmann::json::array();
    for (const EpisodeResult& r : row.results) rj["per_episode"].push_back(episode_json(r));
    j["policies"].push_back(rj);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_comparison_json: cannot open " + path);
  f << j.dump(1) << "\n";
}

// --- Suites and collection ---------------------------------------------------

std::vector<EpisodeConfig> make_episode_suite(int n, uint64_t seed,
                                              const SuiteParams& params) {
  std::vector<EpisodeConfig> out;
  Rng root(splitmix64(seed ^ 0x5317eull));
  for (int i = 0; i < n; ++i) {
    Rng rng = root.fork(i);
    EpisodeConfig cfg;
    cfg.seed = splitmix64(seed + i);
    cfg.dt = 0.33;

    const double dist = rng.uniform(params.min_goal_dist, params.max_goal_dist);
    const double dir = rng.uniform(-M_PI / 4.0, M_PI / 4.0);
    cfg.start = {0.0, 0.0, dir};
    cfg.goal = {dist * std::cos(dir), dist * std::sin(dir), dir};
    cfg.max_steps = static_cast<int>(std::ceil(2.2 * dist / 0.6 / cfg.dt)) + 60;

    const Eigen::Vector2d s(cfg.start.x, cfg.start.y);
    const Eigen::Vector2d g(cfg.goal.x, cfg.goal.y);
    const Eigen::Vector2d d_hat = (g - s).normalized();
    const Eigen::Vector2d n_hat(-d_hat.y(), d_hat.x());

    if (params.with_obstacles) {
      const int k = rng.uniform_int(0, params.max_obstacles);
      for (int o = 0; o < k; ++o) {
        const double f = rng.uniform(0.3, 0.7);
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double off = rng.uniform(0.9, 1.8);
        Circle c;
        c.center = s + f * (g - s) + side * off * n_hat;
        c.radius = rng.uniform(0.25, 0.5);
        if ((c.center - s).norm() < 1.2 + c.radius) continue;
        if ((c.center - g).norm() < 1.2 + c.radius) continue;
        cfg.map.circles.push_back(c);
      }
    }

    const int m = rng.uniform_int(params.min_peds, params.max_peds);
    for (int p = 0; p < m; ++p) {
      const double f = rng.uniform(0.35, 0.75);
      const Eigen::Vector2d crossing = s + f * (g - s);
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      // Start distance timed so the pedestrian reaches the crossing when the
      // robot does (robot average speed ~0.35 m/s).
      double so = std::clamp(0.8 * f * dist / 0.35, 2.0, 5.5);
      for (const Circle& c : cfg.map.circles) {
        if ((crossing + side * so * n_hat - c.center).norm() < c.radius + 0.6) so += 1.0;
      }
      PedestrianConfig ped;
      const Eigen::Vector2d pstart = crossing + side * so * n_hat;
      const Eigen::Vector2d pgoal = crossing - side * (so + 1.0) * n_hat;
      const Eigen::Vector2d to_goal = (pgoal - pstart).normalized();
      ped.start = {pstart.x(), pstart.y(), std::atan2(to_goal.y(), to_goal.x())};
      ped.goal = pgoal;
      cfg.pedestrians.push_back(ped);
    }
    out.push_back(std::move(cfg));
  }
  return out;
}

PolicyCorpus collect_dataset(PolicyNet& policy, const std::vector<EpisodeConfig>& configs,
                             const ObjectiveWeights& weights, const std::string& csv_path,
                             const SocialForceParams& sf_params) {
  PolicyCorpus corpus;
  if (configs.empty()) {
    std::fprintf(stderr, "collect_dataset: warning: no episodes requested, corpus empty\n");
  }
  std::vector<Rollout> rollouts;
  std::vector<MapSpec> maps;
  for (size_t i = 0; i < configs.size(); ++i) {
    EpisodeResult r = run_episode(policy, nullptr, configs[i], weights, sf_params);
    Rollout ro = episode_to_rollout(r, configs[i], static_cast<long>(i));
    rollouts.push_back(ro);
    maps.push_back(configs[i].map);
    corpus.push_back({std::move(ro), configs[i].map});
  }
  if (!csv_path.empty()) {
    write_scenario_csv(csv_path, rollouts);
    write_map_json(csv_path + ".obstacles.json", maps);
  }
  return corpus;
}

}  // namespace socnav
