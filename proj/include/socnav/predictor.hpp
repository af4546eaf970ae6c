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
// Robot-conditioned pedestrian future-trajectory model: given the
// pedestrian's past, the robot's past and the robot's planned future (all in
// the current robot frame), predicts per-step pedestrian velocities that are
// integrated into future positions. The "give-way" query conditions on an
// all-zero robot future, i.e. the robot stopping at its current pose.

#ifndef SOCNAV_PREDICTOR_HPP_
#define SOCNAV_PREDICTOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "socnav/se2.hpp"
#include "socnav/socialforce.hpp"
#include "socnav/tinynet.hpp"

namespace socnav {

struct PredictorConfig {
  int horizon = 8;        // (alpha + 1) past points and beta future points
  double dt = 0.33;
  int hidden = 256;
  int zp_dim = 64;        // past-embedding width
  double v_limit = 1.5;   // per-axis velocity bound [m/s]
};

// One supervised sample, everything in the current robot frame, flattened
// [x0, y0, x1, y1, ...] oldest-first (pasts) / nearest-first (futures).
struct PredictorSample {
  Eigen::Matrix<double, 16, 1> h_past;
  Eigen::Matrix<double, 16, 1> r_past;
  Eigen::Matrix<double, 16, 1> r_future;
  Eigen::Matrix<double, 16, 1> h_future;
};

using SampleSet = std::vector<PredictorSample>;

class PredictorNet {
 public:
  PredictorNet() = default;
  PredictorNet(const PredictorConfig& cfg, uint64_t seed);

  // Batched interface. Inputs are N x 16 matrices. Returns predicted
  // positions (N x 16); the velocity activations are cached for backward.
  tinynet::Matrix predict_positions(const tinynet::Matrix& h_past,
                                    const tinynet::Matrix& r_past,
                                    const tinynet::Matrix& r_future);

  // After predict_positions: gradient of a scalar loss w.r.t. the r_future
  // input, given the gradient w.r.t. predicted positions. Also accumulates
  // parameter gradients (callers that keep the model frozen simply never
  // apply them).
  tinynet::Matrix backward_rfuture(const tinynet::Matrix& d_positions);

  // Track interface used by the objectives and tests.
  Track predict_future(const Track& h_past, const Track& r_past,
                       const Track& r_future);
  Track predict_giveway(const Track& h_past, const Track& r_past);

  void set_mode(tinynet::Mode m);
  void zero_grads();
  uint64_t checksum() const;

  tinynet::Network& fc1() { return fc1_; }
  tinynet::Network& fc2() { return fc2_; }
  const PredictorConfig& config() const { return cfg_; }

  void save(const std::string& path) const;
  static PredictorNet load(const std::string& path);

 private:
  PredictorConfig cfg_;
  tinynet::Network fc1_;  // (h_past, r_past) -> z_p
  tinynet::Network fc2_;  // (z_p, r_future) -> velocities
  tinynet::Matrix last_hpast_, last_rpast_;
};

struct PredictorTrainConfig {
  int epochs = 20;
  int batch = 80;
  double lr = 1e-3;
  double lr_decay = 1.0;           // multiplicative per-epoch decay
  uint64_t seed = 0;
  double val_fraction = 0.1;
  int max_steps_per_epoch = 400;   // caps epoch length on large corpora
  std::string curve_path;          // optional: epoch,train_mse,val_mse,val_cosine
};

struct PredictorEval {
  double mse = 0.0;     // mean squared 2D position error over the 8 steps
  double cosine = 0.0;  // mean displacement-vector cosine similarity
};

// Extracts supervised samples from rollouts: for each window the nearest
// pedestrian whose mean speed over the past window exceeds 0.1 m/s, with all
// tracks transformed into the robot frame at the window's current step.
// Windows whose history would precede the rollout start are discarded.
SampleSet build_predictor_samples(const std::vector<Rollout>& rollouts,
                                  const PredictorConfig& cfg, int stride = 1);

// Supervised training on two corpora, each minibatch drawn half-and-half.
// Pass the same set twice to train on a single corpus.
PredictorNet train_predictor(const SampleSet& set_a, const SampleSet& set_b,
                             const PredictorTrainConfig& tc,
                             const PredictorConfig& cfg = {});

PredictorEval eval_predictor(PredictorNet& net, const SampleSet& samples);

// Pure metric kernel: rows are samples, columns interleave x, y over the
// horizon. `current` holds the pedestrian position the displacements are
// measured from (N x 2). Displacement pairs where either side moves less
// than 1e-6 m are skipped in the cosine average.
PredictorEval prediction_metrics(const tinynet::Matrix& predicted,
                                 const tinynet::Matrix& actual,
                                 const tinynet::Matrix& current);

}  // namespace socnav

#endif  // SOCNAV_PREDICTOR_HPP_
