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

#ifndef SOCNAV_MAP_HPP_
#define SOCNAV_MAP_HPP_

#include <Eigen/Core>
#include <string>
#include <vector>

#include "socnav/se2.hpp"

namespace socnav {

struct Circle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct Wall {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
};

// Static obstacle set for episodes: circles plus thin wall segments.
struct MapSpec {
  std::vector<Circle> circles;
  std::vector<Wall> walls;

  bool empty() const { return circles.empty() && walls.empty(); }
};

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b);

// Distance from a point to the nearest obstacle surface (negative inside a circle).
double distance_to_obstacles(const MapSpec& map, const Eigen::Vector2d& p);

// First-hit distance of a ray from `pose` at body-frame `angle`, capped.
double ray_distance(const MapSpec& map, const Pose2& pose, double angle, double cap);

// n evenly spaced rays over [0, 2pi), starting straight ahead.
std::vector<double> cast_rays(const MapSpec& map, const Pose2& pose, int n, double cap);

// Obstacles-by-scenario sidecar (JSON), written next to exported corpora so
// policy training can rebuild ray observations and collision points.
void write_map_json(const std::string& path, const std::vector<MapSpec>& maps);
std::vector<MapSpec> read_map_json(const std::string& path);

}  // namespace socnav

#endif  // SOCNAV_MAP_HPP_
