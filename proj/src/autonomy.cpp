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

#include "socnav/autonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace socnav {

TopoGraph build_route_graph(const std::vector<Pose2>& route, double spacing,
                            double speed) {
  if (route.size() < 2) throw std::invalid_argument("build_route_graph: route too short");
  if (spacing <= 0.0 || spacing > 3.0)
    throw std::invalid_argument("build_route_graph: spacing must be in (0, 3] m");
  if (speed <= 0.0) throw std::invalid_argument("build_route_graph: speed must be > 0");

  TopoGraph g;
  g.nodes.push_back({0, route.front()});
  double acc = 0.0;
  for (size_t i = 1; i < route.size(); ++i) {
    acc += std::hypot(route[i].x - route[i - 1].x, route[i].y - route[i - 1].y);
    if (acc >= spacing) {
      g.nodes.push_back({g.size(), route[i]});
      g.edge_seconds.push_back(acc / speed);
      acc = 0.0;
    }
  }
  if (acc > 0.0) {
    g.nodes.push_back({g.size(), route.back()});
    g.edge_seconds.push_back(acc / speed);
  }
  return g;
}

void AnchorRegistry::add(const AnchorTag& tag) {
  for (const AnchorTag& t : tags)
    if (t.n_ar == tag.n_ar && t.n_node == tag.n_node)
      throw std::invalid_argument("AnchorRegistry: (tag, node) pair registered twice");
  tags.push_back(tag);
}

std::vector<const AnchorTag*> AnchorRegistry::find(int n_ar) const {
  std::vector<const AnchorTag*> out;
  for (const AnchorTag& t : tags)
    if (t.n_ar == n_ar) out.push_back(&t);
  return out;
}

void save_graph_json(const std::string& path, const TopoGraph& graph,
                     const AnchorRegistry& anchors) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const TopoNode& n : graph.nodes)
    j["nodes"].push_back({{"id", n.id}, {"x", n.pose.x}, {"y", n.pose.y},
                          {"theta", n.pose.theta}});
  j["edges_seconds"] = graph.edge_seconds;
  j["anchors"] = nlohmann::json::array();
  for (const AnchorTag& t : anchors.tags)
    j["anchors"].push_back({{"n_ar", t.n_ar}, {"x", t.p_ar.x}, {"y", t.p_ar.y},
                            {"theta", t.p_ar.theta}, {"n_node", t.n_node}});
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_graph_json: cannot open " + path);
  f << j.dump(1) << "\n";
}

std::pair<TopoGraph, AnchorRegistry> load_graph_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_graph_json: cannot open " + path);
  nlohmann::json j;
  f >> j;
  TopoGraph g;
  for (const auto& nj : j.at("nodes"))
    g.nodes.push_back({nj.at("id").get<int>(),
                       {nj.at("x").get<double>(), nj.at("y").get<double>(),
                        nj.at("theta").get<double>()}});
  g.edge_seconds = j.value("edges_seconds", std::vector<double>{});
  AnchorRegistry reg;
  for (const auto& aj : j.at("anchors"))
    reg.add({aj.at("n_ar").get<int>(),
             {aj.at("x").get<double>(), aj.at("y").get<double>(),
              aj.at("theta").get<double>()},
             aj.at("n_node").get<int>()});
  return {g, reg};
}

int localize_with_anchor(int current_node_estimate, const AnchorDetection& detection,
                         const AnchorRegistry& registry, LocalizeEvent* event) {
  LocalizeEvent ev;
  auto matches = registry.find(detection.n_ar);
  if (matches.empty()) {
    ev.unregistered = true;
    if (event) *event = ev;
    return current_node_estimate;
  }
  // A tag seen from several nodes: use the registration with the smallest
  // relative-pose translation.
  const AnchorTag* best = matches.front();
  for (const AnchorTag* t : matches)
    if (std::hypot(t->p_ar.x, t->p_ar.y) < std::hypot(best->p_ar.x, best->p_ar.y))
      best = t;
  ev.overridden = true;
  int node = best->n_node;
  // Passing-by: the observed tag already sits behind the robot's lateral axis.
  if (detection.observed.x < 0.0) {
    ev.passing_by = true;
    node += 1;
  }
  if (event) *event = ev;
  return node;
}

std::pair<std::vector<Twist>, RecoveryState> rescue_maneuver(
    const RecoveryState& state, const Pose2& /*pose*/, BumperSide side, double t_now,
    double dt) {
  if (dt <= 0.0) throw std::invalid_argument("rescue_maneuver: dt must be > 0");
  RecoveryState next = state;
  next.bumper_side = side;
  next.collision_times.push_back(t_now);
  std::erase_if(next.collision_times,
                [&](double t) { return t < t_now - RecoveryState::kWindowSeconds; });
  if (static_cast<int>(next.collision_times.size()) > RecoveryState::kStuckAfter) {
    next.phase = RecoveryPhase::kStuck;
    return {{}, next};
  }

  next.phase = RecoveryPhase::kBackingUp;
  // Two reverse steps covering exactly -0.5 m, then two rotation steps
  // covering exactly 45 degrees. Left bumper -> rotate right (negative omega).
  const int n_back = 2, n_rot = 2;
  const double v_back = -0.5 / (n_back * dt);
  const double omega_sign = (side == BumperSide::kLeft) ? -1.0 : 1.0;
  const double omega = omega_sign * (M_PI / 4.0) / (n_rot * dt);
  std::vector<Twist> plan;
  for (int i = 0; i < n_back; ++i) plan.push_back({v_back, 0.0});
  for (int i = 0; i < n_rot; ++i) plan.push_back({0.0, omega});
  return {plan, next};
}

void append_rescue_event(const std::string& path, const RescueEvent& event) {
  nlohmann::json j;
  j["day"] = event.day;
  j["t"] = event.t;
  j["pose"] = {{"x", event.pose.x}, {"y", event.pose.y}, {"theta", event.pose.theta}};
  j["collision_history"] = event.collision_history;
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("append_rescue_event: cannot open " + path);
  f << j.dump() << "\n";
}

Pose2 chain_relative_pose(const Pose2& t_oc, const Pose2& t_mc, const Pose2& t_mg,
                          const Pose2& t_og) {
  return compose(compose(compose(t_oc, t_mc), inverse(t_mg)), t_og);
}

const AnchorObservation* OdomSequence::find_anchor(int n_ar) const {
  for (const AnchorObservation& a : anchors)
    if (a.n_ar == n_ar) return &a;
  return nullptr;
}

OdomSequence sequence_from_poses(const std::vector<Pose2>& world_poses,
                                 const Pose2& anchor_world, int n_ar,
                                 double odom_noise_sigma, uint64_t seed,
                                 double detect_range) {
  OdomSequence seq;
  if (world_poses.empty()) return seq;
  Rng rng(splitmix64(seed ^ 0x0d0113ull));
  seq.poses.reserve(world_poses.size());
  seq.poses.push_back(world_poses.front());
  for (size_t i = 1; i < world_poses.size(); ++i) {
    Pose2 step = relative_pose(world_poses[i - 1], world_poses[i]);
    if (odom_noise_sigma > 0.0) {
      step.x += rng.normal(0.0, odom_noise_sigma);
      step.y += rng.normal(0.0, odom_noise_sigma);
      step.theta = normalize_angle(step.theta + rng.normal(0.0, odom_noise_sigma));
    }
    seq.poses.push_back(compose(seq.poses.back(), step));
  }
  // Single observation at the closest approach within detection range,
  // with the true relative pose (detection is a direct measurement).
  int best_step = -1;
  double best_d = detect_range;
  for (size_t i = 0; i < world_poses.size(); ++i) {
    const double d = std::hypot(world_poses[i].x - anchor_world.x,
                                world_poses[i].y - anchor_world.y);
    if (d < best_d) {
      best_d = d;
      best_step = static_cast<int>(i);
    }
  }
  if (best_step >= 0)
    seq.anchors.push_back(
        {n_ar, best_step, relative_pose(world_poses[best_step], anchor_world)});
  return seq;
}

ChainedPair sample_chained_pair(const OdomSequence& seq_c, const OdomSequence& seq_g,
                                int n_ar, Rng& rng, int n_m) {
  const AnchorObservation* obs_c = seq_c.find_anchor(n_ar);
  const AnchorObservation* obs_g = seq_g.find_anchor(n_ar);
  if (!obs_c || !obs_g)
    throw std::invalid_argument("sample_chained_pair: a sequence lacks the anchor");

  const int len_c = static_cast<int>(seq_c.poses.size());
  const int len_g = static_cast<int>(seq_g.poses.size());
  // Backward offset on the current sequence, forward on the goal sequence,
  // so the subgoal lies ahead of the current frame.
  const int n_cr = std::min(rng.uniform_int(0, n_m), obs_c->step);
  const int n_gr = std::min(rng.uniform_int(0, n_m), len_g - 1 - obs_g->step);
  const int idx_c = obs_c->step - n_cr;
  const int idx_g = obs_g->step + n_gr;
  (void)len_c;

  const Pose2 t_oc = relative_pose(seq_c.poses[idx_c], seq_c.poses[obs_c->step]);
  const Pose2 t_og = relative_pose(seq_g.poses[obs_g->step], seq_g.poses[idx_g]);
  ChainedPair out;
  out.idx_current = idx_c;
  out.idx_goal = idx_g;
  out.t_gt = chain_relative_pose(t_oc, obs_c->observed, obs_g->observed, t_og);
  return out;
}

}  // namespace socnav
