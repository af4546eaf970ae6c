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

#include "socnav/continual.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "socnav/rng.hpp"

namespace socnav {

std::vector<DayConfig> default_day_schedule(int n_days, uint64_t seed) {
  if (n_days < 2) throw std::invalid_argument("day schedule needs n_days >= 2");
  std::vector<DayConfig> out;
  Rng rng(splitmix64(seed ^ 0xdA75ull));
  // Disturbances vary day to day within a bounded band.
  const double jitter_band[] = {0.25, 0.35, 0.30, 0.22, 0.38, 0.28};
  for (int d = 0; d < n_days; ++d) {
    DayConfig day;
    day.obstacle_jitter = jitter_band[d % 6];
    day.odom_noise = 0.003 + 0.002 * rng.uniform();
    day.seed = splitmix64(seed + 1000 + d);
    out.push_back(day);
  }
  return out;
}

std::vector<EpisodeConfig> make_day_episodes(const DayConfig& day,
                                             const ContinualParams& params) {
  Rng rng(splitmix64(day.seed ^ 0xda71ull));
  const double length = params.route_length;

  // The day's map: the base obstacle pattern with today's jitter.
  MapSpec map;
  for (int o = 0; o < params.base_obstacles; ++o) {
    const double f = 0.3 + 0.15 * o;
    const double side = o % 2 == 0 ? 1.0 : -1.0;
    Circle c;
    c.center = Eigen::Vector2d(f * length + rng.normal(0.0, day.obstacle_jitter),
                               side * 0.85 + rng.normal(0.0, day.obstacle_jitter));
    c.radius = 0.35;
    // Keep the route start and goal approachable.
    if (c.center.x() < 1.2) c.center.x() = 1.2;
    if (c.center.x() > length - 1.2) c.center.x() = length - 1.2;
    map.circles.push_back(c);
  }

  // Route graph with anchors roughly every 10 m.
  std::vector<Pose2> route;
  for (double x = 0.0; x <= length + 1e-9; x += 0.25) route.push_back({x, 0.0, 0.0});
  TopoGraph graph = build_route_graph(route, 1.0, 0.5);
  AnchorRegistry registry;
  std::vector<Pose2> anchor_world;
  int tag = 0;
  for (int node = 0; node < graph.size(); node += 10) {
    const Pose2& np = graph.nodes[node].pose;
    const Pose2 world{np.x + 0.4, np.y + 0.9, 0.0};
    registry.add({tag, relative_pose(np, world), node});
    anchor_world.push_back(world);
    ++tag;
  }

  std::vector<EpisodeConfig> episodes;
  for (int e = 0; e < day.n_episodes; ++e) {
    EpisodeConfig cfg;
    cfg.seed = splitmix64(day.seed + 17 * e);
    cfg.map = map;
    cfg.start = {0.0, 0.0, 0.0};
    cfg.goal = {length, 0.0, 0.0};
    cfg.max_steps = static_cast<int>(std::ceil(2.2 * length / 0.6 / cfg.dt)) + 60;
    LocalizationSim loc;
    loc.graph = graph;
    loc.registry = registry;
    loc.anchor_world = anchor_world;
    loc.odom_noise_sigma = day.odom_noise;
    cfg.localization = loc;

    Rng erng(cfg.seed);
    for (int p = 0; p < params.peds_per_episode; ++p) {
      const double f = erng.uniform(0.35, 0.75);
      const double side = erng.uniform() < 0.5 ? -1.0 : 1.0;
      const double so = erng.uniform(2.5, 4.5);
      PedestrianConfig ped;
      const Eigen::Vector2d pstart(f * length, side * so);
      const Eigen::Vector2d pgoal(f * length, -side * (so + 1.0));
      const Eigen::Vector2d dir = (pgoal - pstart).normalized();
      ped.start = {pstart.x(), pstart.y(), std::atan2(dir.y(), dir.x())};
      ped.goal = pgoal;
      cfg.pedestrians.push_back(ped);
    }
    episodes.push_back(std::move(cfg));
  }
  return episodes;
}

ContinualResult continual_loop(PolicyNet& policy, const std::vector<DayConfig>& days,
                               const ContinualParams& params) {
  if (days.size() < 2) throw std::invalid_argument("continual_loop: need n_days >= 2");
  ContinualResult result;
  PolicyCorpus accumulated;
  SocialForceParams sf;

  for (size_t d = 0; d < days.size(); ++d) {
    const std::vector<EpisodeConfig> episodes = make_day_episodes(days[d], params);
    int stuck = 0;
    double minutes = 0.0;
    for (size_t e = 0; e < episodes.size(); ++e) {
      EpisodeResult r = run_episode(policy, nullptr, episodes[e], params.weights, sf);
      stuck += r.stuck ? 1 : 0;
      minutes += r.time_s / 60.0;
      if (!params.rescue_log_path.empty()) {
        for (RescueEvent ev : r.rescues) {
          ev.day = static_cast<int>(d) + 1;
          append_rescue_event(params.rescue_log_path, ev);
        }
      }
      accumulated.push_back(
          {episode_to_rollout(r, episodes[e], static_cast<long>(d * 100 + e)),
           episodes[e].map});
    }
    result.stuck_counts.push_back(stuck);
    result.day_minutes.push_back(minutes);
    result.interventions_per_10min.push_back(minutes > 0.0 ? stuck * 10.0 / minutes : 0.0);

    // Nightly fine-tune on everything collected so far; the cross-trajectory
    // half of each batch chains goals across days through the shared anchor.
    if (d + 1 < days.size()) {
      PolicyTrainConfig tc = params.finetune;
      tc.seed = splitmix64(params.finetune.seed + 31 * d);
      tc.curve_path.clear();
      finetune_policy(policy, PolicyMode::kCollect, nullptr, accumulated, tc,
                      params.weights);
    }
  }
  return result;
}

void write_intervention_csv(const std::string& path, const ContinualResult& result) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_intervention_csv: cannot open " + path);
  std::fputs("day,interventions_per_10min,stuck_events,minutes\n", f);
  for (size_t d = 0; d < result.interventions_per_10min.size(); ++d)
    std::fprintf(f, "%zu,%.12g,%d,%.12g\n", d + 1, result.interventions_per_10min[d],
                 result.stuck_counts[d], result.day_minutes[d]);
  std::fclose(f);
}

}  // namespace socnav
