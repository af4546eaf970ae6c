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
// Multi-day deployment simulation: each day runs collection episodes on a
// disturbed route (obstacle jitter, odometry drift with anchor correction),
// counts rescue interventions, and fine-tunes the collection policy on the
// accumulated corpus (cross-day pairs included through trajectory chaining).

#ifndef SOCNAV_CONTINUAL_HPP_
#define SOCNAV_CONTINUAL_HPP_

#include <string>
#include <vector>

#include "socnav/eval.hpp"
#include "socnav/policy.hpp"

namespace socnav {

struct DayConfig {
  double odom_noise = 0.004;      // odometry noise sigma per step
  double obstacle_jitter = 0.25;  // sigma on obstacle placement [m]
  int n_episodes = 8;
  uint64_t seed = 0;
};

// Bounded day-to-day disturbance variation around the defaults.
std::vector<DayConfig> default_day_schedule(int n_days, uint64_t seed);

struct ContinualParams {
  ObjectiveWeights weights;    // collection objective (w_i)
  PolicyTrainConfig finetune;  // per-day fine-tune budget
  double route_length = 14.0;
  int base_obstacles = 4;
  int peds_per_episode = 1;
  std::string rescue_log_path;  // optional line-delimited JSON log
};

struct ContinualResult {
  std::vector<double> interventions_per_10min;
  std::vector<int> stuck_counts;
  std::vector<double> day_minutes;
};

// Fine-tunes `policy` in place after each simulated day; returns the per-day
// intervention curve.
ContinualResult continual_loop(PolicyNet& policy, const std::vector<DayConfig>& days,
                               const ContinualParams& params);

void write_intervention_csv(const std::string& path, const ContinualResult& result);

// The day's episode configs on the fixed route with that day's disturbances
// (exposed for tests).
std::vector<EpisodeConfig> make_day_episodes(const DayConfig& day,
                                             const ContinualParams& params);

}  // namespace socnav

#endif  // SOCNAV_CONTINUAL_HPP_
