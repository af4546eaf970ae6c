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

#include "socnav/policy.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "fd_utils.hpp"
#include "socnav/rng.hpp"

using namespace socnav;
using namespace socnav::testutil;
using tinynet::Matrix;

namespace {

PolicyObservation random_observation(Rng& rng, const PolicyConfig& cfg) {
  PolicyObservation obs;
  obs.goal_rel = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-M_PI, M_PI)};
  for (int i = 0; i <= cfg.n_p; ++i)
    obs.odom_past.emplace_back(rng.uniform(-1.0, 0.0), rng.uniform(-0.5, 0.5));
  obs.ped_valid = true;
  for (int i = 0; i < 8; ++i)
    obs.ped_past.emplace_back(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
  for (int i = 0; i < cfg.n_rays; ++i) obs.rays.push_back(rng.uniform(0.5, cfg.ray_cap));
  return obs;
}

PolicySample random_sample(Rng& rng, const PolicyConfig& cfg, bool with_obstacles) {
  PolicySample s;
  s.obs = random_observation(rng, cfg);
  if (!with_obstacles) {
    s.obs.rays.assign(cfg.n_rays, cfg.ray_cap);
  }
  for (int k = 0; k < cfg.n_rays; ++k) {
    if (s.obs.rays[k] < cfg.ray_cap - 1e-9) {
      const double a = 2.0 * M_PI * k / cfg.n_rays;
      s.obstacle_points.emplace_back(s.obs.rays[k] * std::cos(a),
                                     s.obs.rays[k] * std::sin(a));
    }
  }
  // Pedestrian walking across the robot's heading.
  Eigen::Vector2d ped(rng.uniform(0.8, 2.2), rng.uniform(-1.5, 1.5));
  Eigen::Vector2d vel(rng.uniform(-0.6, 0.2), rng.uniform(-0.6, 0.6));
  for (int k = 0; k < 8; ++k) {
    const Eigen::Vector2d p = ped + (k - 7) * cfg.dt * vel;
    s.obs.ped_past[k] = p;
    s.h_past.segment<2>(2 * k) = p;
    s.r_past.segment<2>(2 * k) =
        Eigen::Vector2d(-cfg.dt * 0.4 * (7 - k), rng.uniform(-0.02, 0.02));
  }
  s.h_future.clear();
  for (int k = 1; k <= cfg.n_s; ++k) s.h_future.push_back(ped + k * cfg.dt * vel);
  return s;
}

}  // namespace

TEST_CASE("zeroed output head decodes to v_max/2 and zero omega") {
  PolicyConfig cfg;
  cfg.hidden = 32;
  PolicyNet net(cfg, 1);
  // Zero the last dense layer; the final tanh then outputs exactly zero.
  for (auto it = net.net().layers().rbegin(); it != net.net().layers().rend(); ++it) {
    if (it->spec.kind == tinynet::LayerKind::kDense) {
      it->w.setZero();
      it->b.setZero();
      break;
    }
  }
  Rng rng(2);
  auto twists = net.forward(random_observation(rng, cfg));
  REQUIRE(twists.size() == 8);
  for (const Twist& t : twists) {
    CHECK(t.v == doctest::Approx(cfg.v_max / 2.0));
    CHECK(t.omega == doctest::Approx(0.0));
  }
}

TEST_CASE("policy outputs always within the decode bounds") {
  PolicyConfig cfg;
  cfg.hidden = 32;
  Rng rng(3);
  for (uint64_t seed : {7ull, 8ull, 9ull}) {
    PolicyNet net(cfg, seed);
    for (int i = 0; i < 50; ++i) {
      auto twists = net.forward(random_observation(rng, cfg));
      for (const Twist& t : twists) {
        CHECK(t.v >= 0.0);
        CHECK(t.v <= cfg.v_max);
        CHECK(std::abs(t.omega) <= cfg.omega_max);
      }
    }
  }
}

TEST_CASE("non-finite observation is rejected") {
  PolicyConfig cfg;
  cfg.hidden = 32;
  PolicyNet net(cfg, 4);
  Rng rng(5);
  PolicyObservation obs = random_observation(rng, cfg);
  obs.goal_rel.x = std::nan("");
  CHECK_THROWS_AS(net.forward(obs), std::invalid_argument);
}

TEST_CASE("j_pose: exact goal, stationary distance, gradient") {
  const double dt = 0.33;
  SUBCASE("twists that exactly reach the goal") {
    std::vector<Twist> straight(8, Twist{0.5, 0.0});
    CHECK(j_pose(straight, {1.32, 0.0, 0.0}, dt).value == doctest::Approx(0.0));
  }
  SUBCASE("stationary twists, goal at distance d") {
    std::vector<Twist> zero(8);
    const double d = 2.5;
    CHECK(j_pose(zero, {d, 0.0, 0.0}, dt).value == doctest::Approx(d * d));
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
      auto twists = random_twists(rng, 8);
      Pose2 goal{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      Objective obj = j_pose(twists, goal, dt);
      auto fd = fd_gradient(
          [&](const std::vector<Twist>& t) { return j_pose(t, goal, dt).value; }, twists);
      CHECK(max_rel_err(obj.d_twists, fd) <= 1e-4);
    }
  }
}

TEST_CASE("j_col: clear path, collision, monotone sweep, gradient") {
  const double dt = 0.33, r_r = 0.25;
  std::vector<Twist> straight(8, Twist{0.5, 0.0});
  SUBCASE("no obstacles in reach") {
    std::vector<Eigen::Vector2d> far{{0.0, 5.0}, {-2.0, 0.0}};
    CHECK(j_col(straight, far, dt, r_r).value == 0.0);
  }
  SUBCASE("rollout through an obstacle point") {
    std::vector<Eigen::Vector2d> hit{{0.66, 0.0}};
    CHECK(j_col(straight, hit, dt, r_r).value > 0.0);
  }
  SUBCASE("value decreases as the obstacle moves away laterally") {
    double prev = std::numeric_limits<double>::infinity();
    for (double off = 0.0; off <= 0.3; off += 0.05) {
      std::vector<Eigen::Vector2d> obs{{0.66, off}};
      const double v = j_col(straight, obs, dt, r_r).value;
      CHECK(v <= prev + 1e-15);
      prev = v;
    }
  }
  SUBCASE("gradient matches finite differences away from the hinge") {
    Rng rng(7);
    int done = 0;
    while (done < 20) {
      auto twists = random_twists(rng, 8);
      std::vector<Eigen::Vector2d> obs{{rng.uniform(0.2, 1.2), rng.uniform(-0.3, 0.3)}};
      TwistRollout ro = rollout_twists(twists, dt);
      bool safe = true;
      for (int i = 1; i <= 8; ++i) {
        const double d = (ro.pos[i] - obs[0]).norm();
        if (!away_from(d, r_r + 0.05, 1e-3) || d < 1e-3) safe = false;
      }
      if (!safe) continue;
      Objective obj = j_col(twists, obs, dt, r_r);
      auto fd = fd_gradient(
          [&](const std::vector<Twist>& t) { return j_col(t, obs, dt, r_r).value; },
          twists);
      CHECK(max_rel_err(obj.d_twists, fd) <= 1e-4);
      ++done;
    }
  }
}

TEST_CASE("j_reg: constant straight line, alternating omega, gradient") {
  SUBCASE("constant straight-line twists cost nothing") {
    std::vector<Twist> straight(8, Twist{0.4, 0.0});
    CHECK(j_reg(straight).value == 0.0);
  }
  SUBCASE("alternating omega beats constant omega in the difference term") {
    std::vector<Twist> alternating(8), constant(8);
    for (int i = 0; i < 8; ++i) {
      alternating[i] = {0.4, i % 2 == 0 ? 1.0 : -1.0};
      constant[i] = {0.4, 1.0};
    }
    CHECK(j_reg(alternating).value > 0.0);
    // Difference term only: constant omega has none, alternating does.
    CHECK(j_reg(alternating).value > j_reg(constant).value);
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      auto twists = random_twists(rng, 8);
      Objective obj = j_reg(twists);
      auto fd =
          fd_gradient([&](const std::vector<Twist>& t) { return j_reg(t).value; }, twists);
      CHECK(max_rel_err(obj.d_twists, fd) <= 1e-4);
    }
  }
}

TEST_CASE("j_cp: zero twists, insensitive predictor, chained gradient") {
  PolicyConfig cfg;
  PredictorConfig pcfg;
  pcfg.hidden = 48;
  pcfg.zp_dim = 16;
  PredictorNet pred(pcfg, 11);
  Rng rng(12);

  SUBCASE("zero twists mean no counterfactual gap") {
    PolicySample s = random_sample(rng, cfg, false);
    std::vector<Twist> zeros(8);
    Objective obj = j_cp(pred, s.h_past, s.r_past, zeros, cfg.dt, true);
    CHECK(obj.value == 0.0);
    CHECK(obj.d_twists.norm() <
          1e-12);  // gap is identically zero at the comparison point
  }
  SUBCASE("predictor that ignores its conditioning yields zero") {
    PredictorNet blind(pcfg, 13);
    blind.fc2().layers()[0].w.rightCols(16).setZero();
    PolicySample s = random_sample(rng, cfg, false);
    auto twists = random_twists(rng, 8);
    CHECK(j_cp(blind, s.h_past, s.r_past, twists, cfg.dt, true).value ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("missing pedestrian contributes nothing") {
    PolicySample s = random_sample(rng, cfg, false);
    auto twists = random_twists(rng, 8);
    Objective obj = j_cp(pred, s.h_past, s.r_past, twists, cfg.dt, false);
    CHECK(obj.value == 0.0);
    CHECK(obj.d_twists.norm() == 0.0);
  }
  SUBCASE("gradient through the frozen predictor matches finite differences") {
    for (int trial = 0; trial < 15; ++trial) {
      PolicySample s = random_sample(rng, cfg, false);
      auto twists = random_twists(rng, 8);
      Objective obj = j_cp(pred, s.h_past, s.r_past, twists, cfg.dt, true);
      auto fd = fd_gradient(
          [&](const std::vector<Twist>& t) {
            return j_cp(pred, s.h_past, s.r_past, t, cfg.dt, true).value;
          },
          twists);
      CHECK(max_rel_err(obj.d_twists, fd) <= 1e-3);
    }
  }
}

TEST_CASE("j_ps literal-min worked examples are exact") {
  ObjectiveWeights w;  // r_h + r_r = 0.7
  std::vector<Twist> zeros(8);
  const double dt = 0.33;

  SUBCASE("one violation-free step zeroes the literal min") {
    Track h_hat;
    h_hat.dt = dt;
    for (double d : {0.5, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4, 2.7}) h_hat.points.emplace_back(d, 0.0);
    CHECK(std::abs(j_ps(h_hat, zeros, dt, w, true).value - 0.0) <= 1e-12);
  }
  SUBCASE("all steps violating takes the smallest penalty") {
    Track h_hat;
    h_hat.dt = dt;
    for (int i = 0; i < 8; ++i) h_hat.points.emplace_back(i % 2 == 0 ? 0.5 : 0.6, 0.0);
    CHECK(std::abs(j_ps(h_hat, zeros, dt, w, true).value - 0.1) <= 1e-12);
  }
  SUBCASE("all distances beyond the bound cost nothing") {
    Track h_hat;
    h_hat.dt = dt;
    for (int i = 0; i < 8; ++i) h_hat.points.emplace_back(0.7 + 0.1 * (i + 1), 0.0);
    CHECK(j_ps(h_hat, zeros, dt, w, true).value == 0.0);
  }
  SUBCASE("mean and max-penetration variants") {
    Track h_hat;
    h_hat.dt = dt;
    for (int i = 0; i < 8; ++i) h_hat.points.emplace_back(i < 4 ? 0.5 : 0.9, 0.0);
    ObjectiveWeights wm = w;
    wm.ps_variant = PsVariant::kMean;
    CHECK(j_ps(h_hat, zeros, dt, wm, true).value == doctest::Approx(4 * 0.2 / 8.0));
    wm.ps_variant = PsVariant::kMaxPenetration;
    CHECK(j_ps(h_hat, zeros, dt, wm, true).value == doctest::Approx(0.2));
  }
}

TEST_CASE("j_int: crossing, parallel offset, gradient sign") {
  const double dt = 0.33;
  SUBCASE("intersecting paths dominate the min with zero") {
    std::vector<Twist> straight(8, Twist{0.5, 0.0});
    TwistRollout ro = rollout_twists(straight, dt);
    std::vector<Eigen::Vector2d> ped;
    for (int i = 1; i <= 8; ++i) ped.push_back(ro.pos[i]);
    ped[3] = ro.pos[4];  // exact intersection at one step
    CHECK(j_int(straight, ped, dt, true).value == doctest::Approx(0.0));
  }
  SUBCASE("parallel paths at constant offset") {
    std::vector<Twist> straight(8, Twist{0.5, 0.0});
    TwistRollout ro = rollout_twists(straight, dt);
    std::vector<Eigen::Vector2d> ped;
    for (int i = 1; i <= 8; ++i) ped.emplace_back(ro.pos[i].x(), ro.pos[i].y() + 2.0);
    CHECK(j_int(straight, ped, dt, true).value == doctest::Approx(2.0));
  }
  SUBCASE("gradient pulls the closest-approach step toward the pedestrian") {
    Rng rng(13);
    int done = 0;
    while (done < 20) {
      auto twists = random_twists(rng, 8);
      std::vector<Eigen::Vector2d> ped;
      Eigen::Vector2d base(rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0));
      for (int i = 0; i < 8; ++i)
        ped.push_back(base + 0.1 * i * Eigen::Vector2d(rng.uniform(-1, 1), 1.0));
      TwistRollout ro = rollout_twists(twists, 0.33);
      std::vector<double> dists;
      for (int i = 0; i < 8; ++i) dists.push_back((ro.pos[i + 1] - ped[i]).norm());
      if (!min_gap_ok(dists, 1e-3)) continue;
      Objective obj = j_int(twists, ped, 0.33, true);
      auto fd = fd_gradient(
          [&](const std::vector<Twist>& t) { return j_int(t, ped, 0.33, true).value; },
          twists);
      CHECK(max_rel_err(obj.d_twists, fd) <= 1e-4);
      ++done;
    }
  }
}

TEST_CASE("loss combination arithmetic") {
  ObjectiveWeights w;
  w.w_cp = 10.0;
  w.w_ps = 100.0;
  CHECK(combine_social(1.0, 2.0, 3.0, w) == 321.0);
  CHECK(combine_social(0.0, 0.0, 0.0, w) == 0.0);
  w.w_i = 1.5;
  CHECK(combine_collect(2.0, 4.0, w) == doctest::Approx(8.0));
  // Zeroing the new objectives reduces the total to the navigation loss.
  ObjectiveWeights ablation = w;
  ablation.w_cp = 0.0;
  ablation.w_ps = 0.0;
  CHECK(combine_social(7.25, 123.0, 456.0, ablation) == 7.25);
}

TEST_CASE("full loss gradient matches finite differences through the predictor") {
  PolicyConfig cfg;
  PredictorConfig pcfg;
  pcfg.hidden = 48;
  pcfg.zp_dim = 16;
  PredictorNet pred(pcfg, 21);
  ObjectiveWeights w;
  Rng rng(22);

  for (PolicyMode mode : {PolicyMode::kSocial, PolicyMode::kCollect}) {
    int done = 0;
    while (done < 10) {
      PolicySample s = random_sample(rng, cfg, true);
      auto twists = random_twists(rng, 8);

      // Kink guards: personal-space clamp/min, collision hinge, interaction min.
      TwistRollout ro = rollout_twists(twists, cfg.dt);
      bool safe = true;
      {
        Matrix hp = s.h_past.transpose(), rp = s.r_past.transpose();
        Matrix rf(1, 16);
        for (int i = 0; i < 8; ++i) {
          rf(0, 2 * i) = ro.pos[i + 1].x();
          rf(0, 2 * i + 1) = ro.pos[i + 1].y();
        }
        pred.set_mode(tinynet::Mode::kEval);
        Matrix cond = pred.predict_positions(hp, rp, rf);
        std::vector<double> dists, terms;
        for (int i = 0; i < 8; ++i) {
          const Eigen::Vector2d hhat(cond(0, 2 * i), cond(0, 2 * i + 1));
          const double d = (hhat - ro.pos[i + 1]).norm();
          dists.push_back(d);
          terms.push_back(std::abs(w.rh_rr() - clamp_distance(d, w.rh_rr())));
          if (!away_from(d, w.rh_rr(), 1e-3) || d < 1e-3) safe = false;
        }
        if (!min_gap_ok(terms, 1e-4)) safe = false;
        for (const auto& o : s.obstacle_points)
          for (int i = 1; i <= 8; ++i)
            if (!away_from((ro.pos[i] - o).norm(), w.r_r + 0.05, 1e-3)) safe = false;
        if (mode == PolicyMode::kCollect) {
          std::vector<double> dint;
          for (int i = 0; i < 8; ++i) dint.push_back((ro.pos[i + 1] - s.h_future[i]).norm());
          if (!min_gap_ok(dint, 1e-3)) safe = false;
        }
      }
      if (!safe) continue;

      auto analytic = policy_loss_grad(mode, &pred, s, twists, w, cfg);
      auto fd = fd_gradient(
          [&](const std::vector<Twist>& t) {
            return policy_loss_value(mode, &pred, s, t, w, cfg);
          },
          twists);
      CHECK(max_rel_err(analytic, fd) <= 1e-3);
      ++done;
    }
  }
}

TEST_CASE("objective gradients assemble linearly and scale with the weights") {
  PolicyConfig cfg;
  PredictorConfig pcfg;
  pcfg.hidden = 48;
  pcfg.zp_dim = 16;
  PredictorNet pred(pcfg, 31);
  Rng rng(32);
  PolicySample s = random_sample(rng, cfg, true);
  auto twists = random_twists(rng, 8);

  ObjectiveWeights w;
  auto grad_with = [&](double scale) {
    ObjectiveWeights sw = w;
    sw.w_c *= scale;
    sw.w_r *= scale;
    sw.w_cp *= scale;
    sw.w_ps *= scale;
    Eigen::MatrixX2d g = policy_loss_grad(PolicyMode::kSocial, &pred, s, twists, sw, cfg);
    // Scale the unweighted goal-pose part too, making the whole loss scale.
    Objective pose = j_pose(twists, s.obs.goal_rel, cfg.dt);
    return Eigen::MatrixX2d(g + (scale - 1.0) * pose.d_twists);
  };
  Eigen::MatrixX2d g1 = grad_with(1.0);
  Eigen::MatrixX2d g2 = grad_with(4.7);
  const double cosine =
      (g1.cwiseProduct(g2)).sum() / (g1.norm() * g2.norm());
  CHECK(cosine >= 1.0 - 1e-10);
}

TEST_CASE("train_policy smoke: loss decreases and the predictor stays frozen") {
  SocialForceParams sf;
  PolicyCorpus corpus = corpus_from_rollouts(generate_dataset(30, 91, sf));
  PredictorConfig pcfg;
  pcfg.hidden = 48;
  pcfg.zp_dim = 16;
  PredictorNet pred(pcfg, 92);
  const uint64_t frozen = pred.checksum();

  PolicyConfig cfg;
  cfg.hidden = 64;
  PolicyTrainConfig tc;
  tc.epochs = 6;
  tc.steps_per_epoch = 10;
  tc.batch = 40;
  tc.seed = 93;
  const auto curve = (std::filesystem::temp_directory_path() / "pol_curve.csv").string();
  tc.curve_path = curve;
  ObjectiveWeights w;

  PolicyNet net = train_policy(PolicyMode::kSocial, &pred, corpus, tc, w, cfg);
  CHECK(pred.checksum() == frozen);

  std::FILE* f = std::fopen(curve.c_str(), "r");
  REQUIRE(f != nullptr);
  char line[512];
  REQUIRE(std::fgets(line, sizeof(line), f) != nullptr);
  std::vector<double> losses;
  while (std::fgets(line, sizeof(line), f)) {
    int e;
    double total, jp, jc, jr, jcp, jps, ji;
    REQUIRE(std::sscanf(line, "%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &e, &total, &jp, &jc, &jr,
                        &jcp, &jps, &ji) == 8);
    losses.push_back(total);
  }
  std::fclose(f);
  REQUIRE(losses.size() == 6);
  CHECK(losses.back() < losses.front());
  std::remove(curve.c_str());

  // Deterministic retrain reproduces the same parameters.
  PolicyTrainConfig tc2 = tc;
  tc2.curve_path.clear();
  PolicyNet net2 = train_policy(PolicyMode::kSocial, &pred, corpus, tc2, w, cfg);
  CHECK(net.net().param_checksum() == net2.net().param_checksum());
}

TEST_CASE("social mode requires a predictor") {
  SocialForceParams sf;
  PolicyCorpus corpus = corpus_from_rollouts(generate_dataset(3, 94, sf));
  PolicyTrainConfig tc;
  tc.epochs = 1;
  tc.steps_per_epoch = 1;
  CHECK_THROWS_AS(train_policy(PolicyMode::kSocial, nullptr, corpus, tc, {}, {}),
                  std::invalid_argument);
}

TEST_CASE("policy save/load round trip") {
  PolicyConfig cfg;
  cfg.hidden = 32;
  PolicyNet net(cfg, 41);
  Rng rng(42);
  PolicyObservation obs = random_observation(rng, cfg);
  auto before = net.forward(obs);
  const auto path = (std::filesystem::temp_directory_path() / "policy_ckpt.json").string();
  net.save(path);
  PolicyNet loaded = PolicyNet::load(path);
  auto after = loaded.forward(obs);
  for (int i = 0; i < 8; ++i) {
    CHECK(before[i].v == after[i].v);
    CHECK(before[i].omega == after[i].omega);
  }
  std::remove(path.c_str());
}
