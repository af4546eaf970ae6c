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
// Minimal dense-network engine: layer chains of dense / batchnorm / relu /
// tanh / scaled_tanh, reverse-mode gradients for both parameters and inputs,
// Adam, and versioned JSON checkpoints.

#ifndef SOCNAV_TINYNET_HPP_
#define SOCNAV_TINYNET_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace socnav::tinynet {

using Matrix = Eigen::MatrixXd;  // batch-major: rows = samples
using Vector = Eigen::VectorXd;

enum class LayerKind { kDense, kBatchNorm, kRelu, kTanh, kScaledTanh };

struct LayerSpec {
  LayerKind kind;
  int in = 0;
  int out = 0;
  double scale = 1.0;  // scaled_tanh only, must be > 0
};

LayerSpec dense(int in, int out);
LayerSpec batchnorm(int dim);
LayerSpec relu(int dim);
LayerSpec tanh_layer(int dim);
LayerSpec scaled_tanh(int dim, double scale);

enum class Mode { kTrain, kEval };

constexpr double kBatchNormMomentum = 0.1;
constexpr double kBatchNormEps = 1e-5;

struct Layer {
  LayerSpec spec;

  // Parameters (dense: w is out x in; batchnorm: per-feature vectors).
  Matrix w;
  Vector b;
  Vector gamma, beta, run_mean, run_var;

  // Parameter gradients, shapes matching the parameters.
  Matrix gw;
  Vector gb, ggamma, gbeta;

  // Forward caches for the backward pass.
  Matrix x_in;
  Matrix x_hat;       // batchnorm normalized input
  Vector batch_mean, batch_var;
  Matrix y_act;       // tanh-family output

  int out_dim() const { return spec.kind == LayerKind::kDense ? spec.out : spec.in; }
};

// A chain of layers with train/eval modes. Adjacent layer dimensions must
// agree at construction. forward() records what backward() needs; backward()
// fills parameter gradients and returns the gradient w.r.t. the input batch.
class Network {
 public:
  Network() = default;
  Network(const std::vector<LayerSpec>& specs, uint64_t seed);

  Matrix forward(const Matrix& batch);
  // out_grad: dLoss/dOutput, same shape as the last forward output.
  Matrix backward(const Matrix& out_grad);

  void zero_grads();
  void set_mode(Mode m) { mode_ = m; }
  Mode mode() const { return mode_; }

  int input_dim() const;
  int output_dim() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Flat views over all parameters / gradients, in a fixed layer order.
  std::vector<double*> param_ptrs();
  std::vector<double*> grad_ptrs();
  std::vector<long> param_sizes() const;
  long n_params() const;

  // Bit-level FNV-1a hash over all parameters; used to assert frozen models.
  uint64_t param_checksum() const;

  uint64_t seed() const { return seed_; }
  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }

 private:
  std::vector<Layer> layers_;
  Mode mode_ = Mode::kTrain;
  bool recorded_ = false;
  uint64_t seed_ = 0;
  long steps_ = 0;  // optimizer steps applied; stored in checkpoints
};

// Adam with bias correction. Moment buffers are lazily sized to the network.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Network& net);
  void reset();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Vector> m_, v_;
};

// Versioned JSON checkpoint with layer specs, parameters (row-major) and
// batchnorm running statistics. Round-trip reproduces eval-mode outputs
// bit-for-bit.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace socnav::tinynet

#endif  // SOCNAV_TINYNET_HPP_
