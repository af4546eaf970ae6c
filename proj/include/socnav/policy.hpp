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
// Navigation and data-collection policies over state observations, their
// differentiable objectives (goal pose, collision, regularization,
// counterfactual perturbation, personal space, interaction), and the
// training loops. The counterfactual terms chain gradients through a frozen
// pedestrian predictor via its input gradients.

#ifndef SOCNAV_POLICY_HPP_
#define SOCNAV_POLICY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "socnav/map.hpp"
#include "socnav/predictor.hpp"
#include "socnav/se2.hpp"
#include "socnav/socialforce.hpp"
#include "socnav/tinynet.hpp"

namespace socnav {

enum class PsVariant { kLiteralMin, kMean, kMaxPenetration };

struct ObjectiveWeights {
  double w_c = 10.0;    // collision term inside the navigation objective
  double w_r = 1.0;     // velocity regularization
  double w_cp = 10.0;   // counterfactual perturbation
  double w_ps = 100.0;  // personal space
  double w_i = 1.5;     // interaction (collection policy)
  double r_h = 0.45;    // personal space radius [m]
  double r_r = 0.25;    // robot radius [m]
  PsVariant ps_variant = PsVariant::kLiteralMin;

  double rh_rr() const { return r_h + r_r; }
  void validate() const;
};

struct PolicyConfig {
  int n_s = 8;            // control horizon
  int n_p = 5;            // past observations
  int n_rays = 16;        // obstacle rays
  double dt = 0.33;
  double v_max = 0.6;     // decode bound: v in [0, v_max]
  double omega_max = 1.0; // decode bound: |omega| <= omega_max
  double ray_cap = 5.0;
  int hidden = 256;

  int obs_dim() const { return 4 + 2 * (n_p + 1) + 2 * 8 + 1 + n_rays; }
};

// State observation standing in for the image stack: relative subgoal pose,
// odometry history, nearest-pedestrian track (with validity), obstacle rays.
struct PolicyObservation {
  Pose2 goal_rel;
  std::vector<Eigen::Vector2d> odom_past;  // n_p + 1 points, robot frame, newest last
  std::vector<Eigen::Vector2d> ped_past;   // 8 points, robot frame, newest last
  bool ped_valid = false;
  std::vector<double> rays;                // n_rays, each in (0, ray_cap]
};

class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(const PolicyConfig& cfg, uint64_t seed);

  // Receding-horizon query: n_s bounded twists, deterministic in eval mode.
  std::vector<Twist> forward(const PolicyObservation& obs);

  // Batched raw tanh outputs (N x 2 n_s) for training.
  tinynet::Matrix forward_raw(const tinynet::Matrix& obs_batch);

  Eigen::VectorXd encode(const PolicyObservation& obs) const;
  // Decode raw tanh outputs into twists: v = v_max (y+1)/2, omega = omega_max y.
  std::vector<Twist> decode(const Eigen::VectorXd& raw) const;

  tinynet::Network& net() { return net_; }
  const PolicyConfig& config() const { return cfg_; }
  void save(const std::string& path) const;
  static PolicyNet load(const std::string& path);

 private:
  PolicyConfig cfg_;
  tinynet::Network net_;
};

// --- Differentiable objectives -------------------------------------------

// Value plus gradient w.r.t. the twist sequence (rows: step; cols: v, omega).
struct Objective {
  double value = 0.0;
  Eigen::MatrixX2d d_twists;
};

// Forward-Euler rollout of the twists from the origin pose, with the adjoint
// pass used by every objective below.
struct TwistRollout {
  std::vector<double> theta;          // theta_0 .. theta_n (theta_0 = 0)
  std::vector<Eigen::Vector2d> pos;   // p_0 .. p_n (p_0 = 0)
};
TwistRollout rollout_twists(const std::vector<Twist>& twists, double dt);
Eigen::MatrixX2d rollout_backward(const TwistRollout& ro,
                                  const std::vector<Twist>& twists,
                                  const std::vector<Eigen::Vector2d>& d_pos,
                                  double d_theta_final, double dt);

// Squared final-position error plus 0.1 x squared heading error.
Objective j_pose(const std::vector<Twist>& twists, const Pose2& goal_rel, double dt,
                 double heading_weight = 0.1);

// Sum over the horizon of squared hinge (r_r + margin - min obstacle distance).
Objective j_col(const std::vector<Twist>& twists,
                const std::vector<Eigen::Vector2d>& obstacle_points, double dt,
                double r_r, double margin = 0.05);

// Mean squared successive twist difference plus mean squared omega.
Objective j_reg(const std::vector<Twist>& twists);

// Counterfactual perturbation: mean squared 2D gap between the prediction
// conditioned on the rolled-out twists and the give-way prediction. Gradients
// reach the twists through the frozen predictor's input gradients.
Objective j_cp(PredictorNet& predictor, const Eigen::Matrix<double, 16, 1>& h_past,
               const Eigen::Matrix<double, 16, 1>& r_past,
               const std::vector<Twist>& twists, double dt, bool ped_valid);

// Personal-space objective on a given conditioned prediction; gradient is
// w.r.t. the twists only (the prediction is treated as fixed).
Objective j_ps(const Track& h_hat, const std::vector<Twist>& twists, double dt,
               const ObjectiveWeights& weights, bool ped_valid);

// Minimum over the horizon of the robot-pedestrian distance.
Objective j_int(const std::vector<Twist>& twists,
                const std::vector<Eigen::Vector2d>& h_future_true, double dt,
                bool ped_valid);

// Weighted sums as configured; pure arithmetic.
double combine_social(double j_nav, double j_cp_value, double j_ps_value,
                      const ObjectiveWeights& w);
double combine_collect(double j_nav, double j_int_value, const ObjectiveWeights& w);

// --- Total loss over training samples ------------------------------------

enum class PolicyMode { kSocial, kCollect };

// One supervised context for a policy query (everything in the robot frame
// at the sample's current step).
struct PolicySample {
  PolicyObservation obs;
  std::vector<Eigen::Vector2d> obstacle_points;   // rebuilt from rays
  Eigen::Matrix<double, 16, 1> h_past = Eigen::Matrix<double, 16, 1>::Zero();
  Eigen::Matrix<double, 16, 1> r_past = Eigen::Matrix<double, 16, 1>::Zero();
  std::vector<Eigen::Vector2d> h_future;          // true pedestrian future
};

struct LossParts {
  double j_pose = 0, j_col = 0, j_reg = 0, j_cp = 0, j_ps = 0, j_int = 0;
  double total = 0;
};

// Total loss (mean over samples) and gradient w.r.t. the flattened twists
// (N x 2 n_s, columns interleaved v, omega). The predictor is used in eval
// mode and only through its input gradients; it is required for kSocial.
LossParts policy_loss_batch(PolicyMode mode, PredictorNet* predictor,
                            const std::vector<PolicySample>& samples,
                            const tinynet::Matrix& twists_flat,
                            const ObjectiveWeights& weights, const PolicyConfig& cfg,
                            tinynet::Matrix* d_twists_out);

// Single-sample convenience used by the gradient-integrity checks.
double policy_loss_value(PolicyMode mode, PredictorNet* predictor,
                         const PolicySample& sample, const std::vector<Twist>& twists,
                         const ObjectiveWeights& weights, const PolicyConfig& cfg);
Eigen::MatrixX2d policy_loss_grad(PolicyMode mode, PredictorNet* predictor,
                                  const PolicySample& sample,
                                  const std::vector<Twist>& twists,
                                  const ObjectiveWeights& weights, const PolicyConfig& cfg);

// --- Training -------------------------------------------------------------

struct PolicyCorpusEntry {
  Rollout rollout;
  MapSpec map;  // empty for open-space corpora
};
using PolicyCorpus = std::vector<PolicyCorpusEntry>;

PolicyCorpus corpus_from_rollouts(std::vector<Rollout> rollouts);
// Loads a scenario CSV plus the optional obstacles sidecar `<path>.obstacles.json`.
PolicyCorpus load_policy_corpus(const std::string& csv_path);

struct PolicyTrainConfig {
  int epochs = 30;
  int batch = 80;
  double lr = 1e-3;
  double lr_decay = 1.0;  // multiplicative per-epoch decay
  uint64_t seed = 0;
  int steps_per_epoch = 50;
  double cross_fraction = 0.5;  // half the batch from chained cross-trajectory pairs
  int goal_horizon_min = 6;     // same-trajectory goal offset [steps]
  int goal_horizon_max = 24;
  std::string curve_path;       // epoch,loss,j_pose,j_col,j_reg,j_cp,j_ps,j_int
};

// Minibatch descent on the selected total loss. The predictor is frozen:
// its parameter checksum is asserted unchanged. Half of each batch pairs a
// state with a future pose of the same rollout, the other half with a
// cross-trajectory goal chained through a shared anchor.
PolicyNet train_policy(PolicyMode mode, PredictorNet* predictor,
                       const PolicyCorpus& corpus, const PolicyTrainConfig& tc,
                       const ObjectiveWeights& weights, const PolicyConfig& cfg = {});

// Continues training an existing policy in place (continual fine-tuning).
void finetune_policy(PolicyNet& policy, PolicyMode mode, PredictorNet* predictor,
                     const PolicyCorpus& corpus, const PolicyTrainConfig& tc,
                     const ObjectiveWeights& weights);

}  // namespace socnav

#endif  // SOCNAV_POLICY_HPP_
