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

#include "socnav/se2.hpp"

#include <cmath>
#include <stdexcept>

namespace socnav {

double normalize_angle(double theta) {
  double t = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (t <= 0.0) t += 2.0 * M_PI;
  return t - M_PI;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
          normalize_angle(a.theta + b.theta)};
}

Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  return {-(c * p.x + s * p.y), -(-s * p.x + c * p.y),
          normalize_angle(-p.theta)};
}

Pose2 relative_pose(const Pose2& a, const Pose2& b) {
  return compose(inverse(a), b);
}

Eigen::Vector2d to_frame_point(const Eigen::Vector2d& p, const Pose2& frame) {
  const double c = std::cos(frame.theta);
  const double s = std::sin(frame.theta);
  const double dx = p.x() - frame.x;
  const double dy = p.y() - frame.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Eigen::Vector2d from_frame_point(const Eigen::Vector2d& p, const Pose2& frame) {
  const double c = std::cos(frame.theta);
  const double s = std::sin(frame.theta);
  return {frame.x + c * p.x() - s * p.y(), frame.y + s * p.x() + c * p.y()};
}

Track to_frame(const Track& track, const Pose2& frame) {
  Track out = track;
  for (auto& p : out.points) {
    if (!p.allFinite()) throw std::invalid_argument("to_frame: non-finite track point");
    p = to_frame_point(p, frame);
  }
  return out;
}

std::vector<Pose2> integrate_unicycle(const Pose2& start,
                                      const std::vector<Twist>& twists,
                                      double dt) {
  if (dt <= 0.0) throw std::invalid_argument("integrate_unicycle: dt must be > 0");
  std::vector<Pose2> poses;
  poses.reserve(twists.size());
  Pose2 p = start;
  for (const Twist& u : twists) {
    p.x += u.v * std::cos(p.theta) * dt;
    p.y += u.v * std::sin(p.theta) * dt;
    p.theta = normalize_angle(p.theta + u.omega * dt);
    poses.push_back(p);
  }
  return poses;
}

double clamp_distance(double d, double bound) {
  if (bound <= 0.0) throw std::invalid_argument("clamp_distance: bound must be > 0");
  return std::min(std::max(d, 0.0), bound);
}

}  // namespace socnav
