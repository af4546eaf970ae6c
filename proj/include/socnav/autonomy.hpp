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
// Route autonomy machinery: topological graph over poses, anchor-assisted
// node localization, the collision recovery state machine, and relative-pose
// chaining of two trajectories through a shared anchor.

#ifndef SOCNAV_AUTONOMY_HPP_
#define SOCNAV_AUTONOMY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "socnav/rng.hpp"
#include "socnav/se2.hpp"

namespace socnav {

struct TopoNode {
  int id = 0;
  Pose2 pose;
};

struct TopoGraph {
  std::vector<TopoNode> nodes;
  std::vector<double> edge_seconds;  // temporal distance between consecutive nodes
  int size() const { return static_cast<int>(nodes.size()); }
};

// Nodes sampled along a route at a fixed spatial interval (must be <= 3 m);
// edges get the traversal time at `speed`.
TopoGraph build_route_graph(const std::vector<Pose2>& route, double spacing,
                            double speed);

struct AnchorTag {
  int n_ar = 0;
  Pose2 p_ar;      // tag pose in the robot frame at registration
  int n_node = 0;  // associated graph node
};

struct AnchorRegistry {
  std::vector<AnchorTag> tags;
  void add(const AnchorTag& tag);
  std::vector<const AnchorTag*> find(int n_ar) const;
};

// Graph file: {nodes:[{id,x,y,theta}], anchors:[{n_ar,x,y,theta,n_node}]}.
void save_graph_json(const std::string& path, const TopoGraph& graph,
                     const AnchorRegistry& anchors);
std::pair<TopoGraph, AnchorRegistry> load_graph_json(const std::string& path);

struct AnchorDetection {
  int n_ar = 0;
  Pose2 observed;  // tag pose in the current robot frame
};

struct LocalizeEvent {
  bool overridden = false;
  bool passing_by = false;
  bool unregistered = false;
};

// Overrides the node estimate with the detected tag's registered node
// (closest registration if a tag maps to several). If the observed tag sits
// behind the robot's lateral axis the robot already passed it, so the next
// node is returned instead. Unregistered tags leave the estimate unchanged.
int localize_with_anchor(int current_node_estimate, const AnchorDetection& detection,
                         const AnchorRegistry& registry, LocalizeEvent* event = nullptr);

enum class RecoveryPhase { kNormal, kBackingUp, kRotating, kStuck };
enum class BumperSide { kNone, kLeft, kRight };

struct RecoveryState {
  RecoveryPhase phase = RecoveryPhase::kNormal;
  BumperSide bumper_side = BumperSide::kNone;
  std::vector<double> collision_times;  // rolling 30 s window

  static constexpr double kWindowSeconds = 30.0;
  static constexpr int kStuckAfter = 3;  // stuck only when MORE than this many
};

struct RescueEvent {
  int day = 0;
  double t = 0.0;
  Pose2 pose;
  std::vector<double> collision_history;
};

// Open-loop recovery plan for a collision detected at time `t_now`: reverse
// 0.5 m along the heading, then rotate 45 degrees in place away from the
// bumper side. Trips to kStuck (empty plan) on the 4th collision within 30 s.
std::pair<std::vector<Twist>, RecoveryState> rescue_maneuver(
    const RecoveryState& state, const Pose2& pose, BumperSide side, double t_now,
    double dt);

// Appends one line-delimited JSON record {day,t,pose,collision_history}.
void append_rescue_event(const std::string& path, const RescueEvent& event);

// T_oc * T_mc * T_mg^{-1} * T_og.
Pose2 chain_relative_pose(const Pose2& t_oc, const Pose2& t_mc, const Pose2& t_mg,
                          const Pose2& t_og);

struct AnchorObservation {
  int n_ar = 0;
  int step = 0;
  Pose2 observed;  // tag pose in the robot frame at `step`
};

// A recorded traversal: odometry poses (optionally drifted) plus the anchor
// detections made along the way.
struct OdomSequence {
  std::vector<Pose2> poses;
  std::vector<AnchorObservation> anchors;

  const AnchorObservation* find_anchor(int n_ar) const;
};

// Builds a sequence from ground-truth poses: odometry accumulates per-step
// noise; the anchor is observed (true relative pose) at the closest approach
// within `detect_range`.
OdomSequence sequence_from_poses(const std::vector<Pose2>& world_poses,
                                 const Pose2& anchor_world, int n_ar,
                                 double odom_noise_sigma, uint64_t seed,
                                 double detect_range = 3.0);

struct ChainedPair {
  int idx_current = 0;  // step on the current sequence
  int idx_goal = 0;     // step on the goal sequence
  Pose2 t_gt;           // goal frame relative to current frame
};

// Cross-trajectory training pair through a shared anchor: backward offset
// n_cr on the current sequence, forward offset n_gr on the goal sequence,
// both uniform in [0, n_m], composed entirely from odometry and the two
// anchor observations.
ChainedPair sample_chained_pair(const OdomSequence& seq_c, const OdomSequence& seq_g,
                                int n_ar, Rng& rng, int n_m = 18);

}  // namespace socnav

#endif  // SOCNAV_AUTONOMY_HPP_
