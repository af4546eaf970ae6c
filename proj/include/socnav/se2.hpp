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

#ifndef SOCNAV_SE2_HPP_
#define SOCNAV_SE2_HPP_

#include <Eigen/Core>
#include <string>
#include <vector>

namespace socnav {

// Planar rigid pose. theta is kept in (-pi, pi] after every operation.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

// Unicycle velocity command.
struct Twist {
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s
};

// Fixed-rate 2D position sequence (pedestrian or robot), expressed in the
// coordinate system identified by `frame`.
struct Track {
  std::vector<Eigen::Vector2d> points;
  double dt = 0.0;
  std::string frame;
};

// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

// SE(2) composition a * b (b expressed in a's frame).
Pose2 compose(const Pose2& a, const Pose2& b);

Pose2 inverse(const Pose2& p);

// Relative pose of b as seen from a: inverse(a) * b.
Pose2 relative_pose(const Pose2& a, const Pose2& b);

// Expresses a world point in the coordinate system of `frame`.
Eigen::Vector2d to_frame_point(const Eigen::Vector2d& p, const Pose2& frame);

// Maps a point expressed in `frame` back to the world.
Eigen::Vector2d from_frame_point(const Eigen::Vector2d& p, const Pose2& frame);

// Re-expresses every track point in the coordinate system of `frame`.
Track to_frame(const Track& track, const Pose2& frame);

// Forward-Euler unicycle rollout: one pose per twist, headings normalized.
// x += v cos(theta) dt, y += v sin(theta) dt, theta += omega dt.
std::vector<Pose2> integrate_unicycle(const Pose2& start,
                                      const std::vector<Twist>& twists,
                                      double dt);

// min(max(d, 0), bound). Requires bound > 0.
double clamp_distance(double d, double bound);

}  // namespace socnav

#endif  // SOCNAV_SE2_HPP_
