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

#include "socnav/map.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace socnav {

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double distance_to_obstacles(const MapSpec& map, const Eigen::Vector2d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Circle& c : map.circles)
    best = std::min(best, (p - c.center).norm() - c.radius);
  for (const Wall& w : map.walls)
    best = std::min(best, point_segment_distance(p, w.a, w.b));
  return best;
}

namespace {

// Ray p0 + t d against a circle; smallest t >= 0 or infinity.
double ray_circle(const Eigen::Vector2d& p0, const Eigen::Vector2d& d, const Circle& c) {
  const Eigen::Vector2d m = p0 - c.center;
  const double b = m.dot(d);
  const double q = m.squaredNorm() - c.radius * c.radius;
  if (q < 0.0) return 0.0;  // starting inside
  const double disc = b * b - q;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
}

double ray_segment(const Eigen::Vector2d& p0, const Eigen::Vector2d& d,
                   const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d v = b - a;
  const double denom = d.x() * v.y() - d.y() * v.x();
  if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const Eigen::Vector2d w = a - p0;
  const double t = (w.x() * v.y() - w.y() * v.x()) / denom;
  const double s = (w.x() * d.y() - w.y() * d.x()) / denom;
  if (t >= 0.0 && s >= 0.0 && s <= 1.0) return t;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

double ray_distance(const MapSpec& map, const Pose2& pose, double angle, double cap) {
  const double world_angle = pose.theta + angle;
  const Eigen::Vector2d p0(pose.x, pose.y);
  const Eigen::Vector2d d(std::cos(world_angle), std::sin(world_angle));
  double best = cap;
  for (const Circle& c : map.circles) best = std::min(best, ray_circle(p0, d, c));
  for (const Wall& w : map.walls) best = std::min(best, ray_segment(p0, d, w.a, w.b));
  return std::max(best, 1e-6);  // keep ranges strictly positive
}

std::vector<double> cast_rays(const MapSpec& map, const Pose2& pose, int n, double cap) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = ray_distance(map, pose, 2.0 * M_PI * i / n, cap);
  return out;
}

void write_map_json(const std::string& path, const std::vector<MapSpec>& maps) {
  nlohmann::json j = nlohmann::json::array();
  for (const MapSpec& m : maps) {
    nlohmann::json mj;
    mj["circles"] = nlohmann::json::array();
    for (const Circle& c : m.circles)
      mj["circles"].push_back({{"x", c.center.x()}, {"y", c.center.y()}, {"r", c.radius}});
    mj["walls"] = nlohmann::json::array();
    for (const Wall& w : m.walls)
      mj["walls"].push_back(
          {{"ax", w.a.x()}, {"ay", w.a.y()}, {"bx", w.b.x()}, {"by", w.b.y()}});
    j.push_back(mj);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_map_json: cannot open " + path);
  f << j.dump(1) << "\n";
}

std::vector<MapSpec> read_map_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_map_json: cannot open " + path);
  nlohmann::json j;
  f >> j;
  std::vector<MapSpec> out;
  for (const auto& mj : j) {
    MapSpec m;
    for (const auto& cj : mj.value("circles", nlohmann::json::array()))
      m.circles.push_back({{cj.at("x").get<double>(), cj.at("y").get<double>()},
                           cj.at("r").get<double>()});
    for (const auto& wj : mj.value("walls", nlohmann::json::array()))
      m.walls.push_back({{wj.at("ax").get<double>(), wj.at("ay").get<double>()},
                         {wj.at("bx").get<double>(), wj.at("by").get<double>()}});
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace socnav
