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

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "socnav/rng.hpp"

using namespace socnav;

namespace {

// Independent oracle: 3x3 homogeneous-matrix algebra.
Eigen::Matrix3d pose_matrix(const Pose2& p) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = std::cos(p.theta);
  m(0, 1) = -std::sin(p.theta);
  m(1, 0) = std::sin(p.theta);
  m(1, 1) = std::cos(p.theta);
  m(0, 2) = p.x;
  m(1, 2) = p.y;
  return m;
}

Pose2 pose_from_matrix(const Eigen::Matrix3d& m) {
  return {m(0, 2), m(1, 2), std::atan2(m(1, 0), m(0, 0))};
}

Pose2 random_pose(Rng& rng) {
  return {rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
          rng.uniform(-M_PI, M_PI)};
}

void check_pose_eq(const Pose2& a, const Pose2& b, double tol) {
  CHECK(std::abs(a.x - b.x) <= tol);
  CHECK(std::abs(a.y - b.y) <= tol);
  CHECK(std::abs(normalize_angle(a.theta - b.theta)) <= tol);
}

}  // namespace

TEST_CASE("compose identity and inverse") {
  Pose2 id;
  Pose2 p{1.5, -2.0, 0.7};
  check_pose_eq(compose(id, p), p, 0.0);
  check_pose_eq(compose(p, id), p, 0.0);
  check_pose_eq(compose(p, inverse(p)), id, 1e-12);
  check_pose_eq(compose(inverse(p), p), id, 1e-12);
}

TEST_CASE("compose matches homogeneous-matrix oracle") {
  Pose2 a{1.0, 0.0, M_PI / 2.0};
  Pose2 b{1.0, 0.0, 0.0};
  Pose2 got = compose(a, b);
  check_pose_eq(got, {1.0, 1.0, M_PI / 2.0}, 1e-12);

  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    Pose2 p = random_pose(rng);
    Pose2 q = random_pose(rng);
    Pose2 oracle = pose_from_matrix(pose_matrix(p) * pose_matrix(q));
    check_pose_eq(compose(p, q), oracle, 1e-10);
  }
}

TEST_CASE("inverse examples and oracle") {
  check_pose_eq(inverse(Pose2{}), Pose2{}, 0.0);
  check_pose_eq(inverse({1.0, 0.0, 0.0}), {-1.0, 0.0, 0.0}, 1e-15);
  check_pose_eq(inverse({0.0, 2.0, M_PI / 2.0}), {-2.0, 0.0, -M_PI / 2.0}, 1e-15);

  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    Pose2 p = random_pose(rng);
    Pose2 oracle = pose_from_matrix(pose_matrix(p).inverse());
    check_pose_eq(inverse(p), oracle, 1e-10);
  }
}

TEST_CASE("composition associative on random triples") {
  Rng rng(43);
  for (int i = 0; i < 300; ++i) {
    Pose2 a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    check_pose_eq(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-10);
  }
}

TEST_CASE("theta stays normalized") {
  Rng rng(44);
  for (int i = 0; i < 500; ++i) {
    Pose2 a{0, 0, rng.uniform(-50.0, 50.0)};
    Pose2 b{0, 0, rng.uniform(-50.0, 50.0)};
    Pose2 c = compose(a, b);
    CHECK(c.theta > -M_PI);
    CHECK(c.theta <= M_PI);
  }
  CHECK(normalize_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(3.0 * M_PI) == doctest::Approx(M_PI));
}

TEST_CASE("to_frame examples") {
  Track t;
  t.dt = 0.33;
  t.points = {{2.0, 0.0}, {1.0, 1.0}};

  Track same = to_frame(t, Pose2{});
  CHECK(same.points[0].isApprox(t.points[0]));
  CHECK(same.points[1].isApprox(t.points[1]));

  Track shifted = to_frame(t, {1.0, 0.0, 0.0});
  CHECK(shifted.points[0].x() == doctest::Approx(1.0));
  CHECK(shifted.points[0].y() == doctest::Approx(0.0));

  Track rotated = to_frame(t, {0.0, 0.0, M_PI / 2.0});
  CHECK(rotated.points[1].x() == doctest::Approx(1.0));
  CHECK(rotated.points[1].y() == doctest::Approx(-1.0));
}

TEST_CASE("to_frame round trip recovers the track") {
  Rng rng(45);
  for (int i = 0; i < 100; ++i) {
    Track t;
    t.dt = 0.33;
    for (int k = 0; k < 8; ++k)
      t.points.emplace_back(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    Pose2 f = random_pose(rng);
    Track there = to_frame(t, f);
    for (size_t k = 0; k < t.points.size(); ++k) {
      Eigen::Vector2d back = from_frame_point(there.points[k], f);
      CHECK(std::abs(back.x() - t.points[k].x()) <= 1e-10);
      CHECK(std::abs(back.y() - t.points[k].y()) <= 1e-10);
    }
  }
}

TEST_CASE("integrate_unicycle straight line") {
  std::vector<Twist> twists(8, Twist{0.5, 0.0});
  auto poses = integrate_unicycle(Pose2{}, twists, 0.33);
  REQUIRE(poses.size() == 8);
  CHECK(poses.back().x == doctest::Approx(1.32).epsilon(1e-12));
  CHECK(poses.back().y == doctest::Approx(0.0));
  CHECK(poses.back().theta == doctest::Approx(0.0));
}

TEST_CASE("integrate_unicycle pure rotation") {
  std::vector<Twist> twists(2, Twist{0.0, M_PI / 4.0});
  auto poses = integrate_unicycle(Pose2{}, twists, 1.0);
  CHECK(poses.back().theta == doctest::Approx(M_PI / 2.0));
  CHECK(poses.back().x == doctest::Approx(0.0));
  CHECK(poses.back().y == doctest::Approx(0.0));
}

TEST_CASE("integrate_unicycle near constant-twist arc") {
  const double v = 0.3, w = 0.2, dt = 0.33;
  std::vector<Twist> twists(8, Twist{v, w});
  auto poses = integrate_unicycle(Pose2{}, twists, dt);
  const double t = 8 * dt;
  const double xe = (v / w) * std::sin(w * t);
  const double ye = (v / w) * (1.0 - std::cos(w * t));
  CHECK(std::abs(poses.back().x - xe) < 0.05);
  CHECK(std::abs(poses.back().y - ye) < 0.05);
  CHECK(poses.back().theta == doctest::Approx(w * t));
}

TEST_CASE("integrate_unicycle zero twists holds the start") {
  Pose2 start{1.0, 2.0, 0.5};
  std::vector<Twist> twists(5);
  auto poses = integrate_unicycle(start, twists, 0.33);
  for (const Pose2& p : poses) check_pose_eq(p, start, 0.0);
}

TEST_CASE("clamp_distance") {
  CHECK(clamp_distance(0.9, 0.7) == 0.7);
  CHECK(clamp_distance(0.3, 0.7) == 0.3);
  CHECK(clamp_distance(-0.1, 0.7) == 0.0);
  Rng rng(46);
  for (int i = 0; i < 200; ++i) {
    double d = rng.uniform(-3.0, 3.0);
    double c = clamp_distance(d, 0.7);
    CHECK(c >= 0.0);
    CHECK(c <= 0.7);
  }
  CHECK_THROWS_AS(clamp_distance(1.0, 0.0), std::invalid_argument);
}
