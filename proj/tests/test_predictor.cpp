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

#include "socnav/predictor.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "socnav/rng.hpp"

using namespace socnav;
using tinynet::Matrix;

namespace {

Track make_track(std::initializer_list<std::pair<double, double>> pts, double dt = 0.33) {
  Track t;
  t.dt = dt;
  for (auto [x, y] : pts) t.points.emplace_back(x, y);
  return t;
}

Track random_track(Rng& rng, int n, double span = 3.0) {
  Track t;
  t.dt = 0.33;
  for (int i = 0; i < n; ++i)
    t.points.emplace_back(rng.uniform(-span, span), rng.uniform(-span, span));
  return t;
}

void zero_output_layer(tinynet::Network& net) {
  for (auto it = net.layers().rbegin(); it != net.layers().rend(); ++it) {
    if (it->spec.kind == tinynet::LayerKind::kDense) {
      it->w.setZero();
      it->b.setZero();
      break;
    }
  }
}

SampleSet stationary_samples(int n, uint64_t seed) {
  Rng rng(seed);
  SampleSet out;
  for (int i = 0; i < n; ++i) {
    PredictorSample s;
    const Eigen::Vector2d hpos(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    for (int k = 0; k < 8; ++k) {
      s.h_past.segment<2>(2 * k) = hpos;
      s.h_future.segment<2>(2 * k) = hpos;
      s.r_past.segment<2>(2 * k) =
          Eigen::Vector2d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      s.r_future.segment<2>(2 * k) =
          Eigen::Vector2d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("zeroed output head predicts a stationary pedestrian") {
  PredictorConfig cfg;
  PredictorNet net(cfg, 3);
  zero_output_layer(net.fc2());
  Rng rng(4);
  Track h = random_track(rng, 8);
  Track r = random_track(rng, 8);
  Track rf = random_track(rng, 8);
  Track pred = net.predict_future(h, r, rf);
  REQUIRE(pred.points.size() == 8);
  for (const auto& p : pred.points) {
    CHECK(p.x() == doctest::Approx(h.points.back().x()));
    CHECK(p.y() == doctest::Approx(h.points.back().y()));
  }
}

TEST_CASE("consecutive predicted points respect the velocity bound") {
  PredictorConfig cfg;
  Rng rng(5);
  const double bound = cfg.v_limit * std::sqrt(2.0) * cfg.dt + 1e-12;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    PredictorNet net(cfg, seed);
    for (int trial = 0; trial < 20; ++trial) {
      Track h = random_track(rng, 8);
      Track r = random_track(rng, 8);
      Track rf = random_track(rng, 8);
      Track pred = net.predict_future(h, r, rf);
      Eigen::Vector2d prev = h.points.back();
      for (const auto& p : pred.points) {
        CHECK((p - prev).norm() <= bound);
        prev = p;
      }
    }
  }
}

TEST_CASE("predict_giveway equals predict_future on zeros") {
  PredictorConfig cfg;
  PredictorNet net(cfg, 6);
  Rng rng(7);
  Track h = random_track(rng, 8);
  Track r = random_track(rng, 8);
  Track zeros = make_track({{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}});
  Track a = net.predict_giveway(h, r);
  Track b = net.predict_future(h, r, zeros);
  for (int i = 0; i < 8; ++i) {
    CHECK(a.points[i].x() == b.points[i].x());
    CHECK(a.points[i].y() == b.points[i].y());
  }
  // Counterfactual gap is identically zero when the conditioning is already zero.
  for (int i = 0; i < 8; ++i) CHECK((a.points[i] - b.points[i]).norm() == 0.0);
}

TEST_CASE("prediction is a deterministic function of inputs") {
  PredictorConfig cfg;
  PredictorNet net(cfg, 8);
  Rng rng(9);
  Track h = random_track(rng, 8);
  Track r = random_track(rng, 8);
  Track rf = random_track(rng, 8);
  Track a = net.predict_future(h, r, rf);
  Track b = net.predict_future(h, r, rf);
  for (int i = 0; i < 8; ++i) CHECK(a.points[i] == b.points[i]);
}

TEST_CASE("track length mismatch is rejected") {
  PredictorConfig cfg;
  PredictorNet net(cfg, 10);
  Rng rng(11);
  Track h = random_track(rng, 7);
  Track r = random_track(rng, 8);
  CHECK_THROWS_AS(net.predict_future(h, r, r), std::invalid_argument);
}

TEST_CASE("prediction metrics: perfect and reflected") {
  Matrix current(1, 2);
  current << 0.0, 0.0;
  Matrix truth(1, 16);
  for (int k = 0; k < 8; ++k) {
    truth(0, 2 * k) = 0.1 * (k + 1);
    truth(0, 2 * k + 1) = -0.05 * (k + 1);
  }
  PredictorEval perfect = prediction_metrics(truth, truth, current);
  CHECK(perfect.mse == 0.0);
  CHECK(perfect.cosine == doctest::Approx(1.0));

  Matrix reflected = -truth;
  PredictorEval anti = prediction_metrics(reflected, truth, current);
  CHECK(anti.cosine == doctest::Approx(-1.0));
  CHECK(anti.mse > 0.0);
}

TEST_CASE("sample building: window counts, frames, nearest pedestrian") {
  SocialForceParams params;
  auto rollouts = generate_dataset(3, 21, params);
  PredictorConfig cfg;
  SampleSet samples = build_predictor_samples(rollouts, cfg, /*stride=*/1);
  // 80 steps -> t in [7, 70] inclusive = 64 windows per scenario at most.
  CHECK(samples.size() <= 3 * 64);
  CHECK(samples.size() > 0);
  // r_past's final point is the frame origin (the robot's current position).
  for (const auto& s : samples) {
    CHECK(std::abs(s.r_past(14)) < 1e-12);
    CHECK(std::abs(s.r_past(15)) < 1e-12);
  }
}

TEST_CASE("stationary pedestrians are excluded from samples") {
  SocialForceParams params;
  Scenario sc;
  sc.dt = 0.33;
  sc.n_steps = 80;
  ScenarioAgent robot;
  robot.id = 0;
  robot.kind = AgentKind::kRobot;
  robot.start = {0.0, 0.0, 0.0};
  robot.goal = {5.0, 0.0};
  ScenarioAgent ped;  // parked pedestrian
  ped.id = 1;
  ped.kind = AgentKind::kPedestrian;
  ped.start = {10.0, 10.0, 0.0};
  ped.goal = {10.0, 10.0};
  sc.agents = {robot, ped};
  auto samples = build_predictor_samples({rollout_scenario(sc, params)}, PredictorConfig{});
  CHECK(samples.empty());
}

TEST_CASE("stationary targets converge to near-zero velocities") {
  SampleSet data = stationary_samples(400, 31);
  PredictorConfig cfg;
  cfg.hidden = 64;
  cfg.zp_dim = 16;
  PredictorTrainConfig tc;
  tc.epochs = 60;
  tc.seed = 6;
  tc.lr = 3e-3;
  tc.max_steps_per_epoch = 10;
  PredictorNet net = train_predictor(data, data, tc, cfg);
  PredictorEval ev = eval_predictor(net, data);
  CHECK(ev.mse < 1e-4);
}

TEST_CASE("training loss strictly decreases over the first 10 epochs") {
  SampleSet data = stationary_samples(400, 31);
  PredictorConfig cfg;
  cfg.hidden = 64;
  cfg.zp_dim = 16;
  PredictorTrainConfig tc;
  tc.epochs = 12;
  tc.seed = 5;
  tc.max_steps_per_epoch = 8;
  const auto curve_path =
      (std::filesystem::temp_directory_path() / "pred_curve.csv").string();
  tc.curve_path = curve_path;
  PredictorNet net = train_predictor(data, data, tc, cfg);

  // Parse the training curve: strictly decreasing over the first 10 epochs.
  std::FILE* f = std::fopen(curve_path.c_str(), "r");
  REQUIRE(f != nullptr);
  char line[256];
  REQUIRE(std::fgets(line, sizeof(line), f) != nullptr);  // header
  std::vector<double> train_mse;
  while (std::fgets(line, sizeof(line), f)) {
    int epoch;
    double tr, vm, vc;
    REQUIRE(std::sscanf(line, "%d,%lf,%lf,%lf", &epoch, &tr, &vm, &vc) == 4);
    train_mse.push_back(tr);
  }
  std::fclose(f);
  REQUIRE(train_mse.size() >= 10);
  for (int e = 1; e < 10; ++e) CHECK(train_mse[e] < train_mse[e - 1]);
  std::remove(curve_path.c_str());
}

TEST_CASE("training is deterministic given the seed") {
  SampleSet data = stationary_samples(100, 41);
  PredictorConfig cfg;
  cfg.hidden = 32;
  cfg.zp_dim = 8;
  PredictorTrainConfig tc;
  tc.epochs = 2;
  tc.seed = 77;
  tc.max_steps_per_epoch = 5;
  PredictorNet a = train_predictor(data, data, tc, cfg);
  PredictorNet b = train_predictor(data, data, tc, cfg);
  CHECK(a.checksum() == b.checksum());
}

TEST_CASE("empty dataset is rejected") {
  CHECK_THROWS_AS(train_predictor({}, stationary_samples(4, 1), {}, {}),
                  std::invalid_argument);
}

TEST_CASE("save/load round trip preserves outputs") {
  PredictorConfig cfg;
  cfg.hidden = 32;
  cfg.zp_dim = 8;
  PredictorNet net(cfg, 51);
  Rng rng(52);
  Track h = random_track(rng, 8);
  Track r = random_track(rng, 8);
  Track rf = random_track(rng, 8);
  Track before = net.predict_future(h, r, rf);

  const auto path = (std::filesystem::temp_directory_path() / "pred_ckpt.json").string();
  net.save(path);
  PredictorNet loaded = PredictorNet::load(path);
  Track after = loaded.predict_future(h, r, rf);
  for (int i = 0; i < 8; ++i) {
    CHECK(before.points[i].x() == after.points[i].x());
    CHECK(before.points[i].y() == after.points[i].y());
  }
  std::remove(path.c_str());
}
