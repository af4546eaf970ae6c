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

#include "socnav/tinynet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "socnav/rng.hpp"

namespace socnav::tinynet {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kScaledTanh: return "scaled_tanh";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "dense") return LayerKind::kDense;
  if (s == "batchnorm") return LayerKind::kBatchNorm;
  if (s == "relu") return LayerKind::kRelu;
  if (s == "tanh") return LayerKind::kTanh;
  if (s == "scaled_tanh") return LayerKind::kScaledTanh;
  throw std::runtime_error("tinynet: unknown layer kind '" + s + "'");
}

}  // namespace

LayerSpec dense(int in, int out) {
  if (in < 1 || out < 1) throw std::invalid_argument("dense: dims must be >= 1");
  return {LayerKind::kDense, in, out, 1.0};
}
LayerSpec batchnorm(int dim) { return {LayerKind::kBatchNorm, dim, dim, 1.0}; }
LayerSpec relu(int dim) { return {LayerKind::kRelu, dim, dim, 1.0}; }
LayerSpec tanh_layer(int dim) { return {LayerKind::kTanh, dim, dim, 1.0}; }
LayerSpec scaled_tanh(int dim, double scale) {
  if (scale <= 0.0) throw std::invalid_argument("scaled_tanh: scale must be > 0");
  return {LayerKind::kScaledTanh, dim, dim, scale};
}

Network::Network(const std::vector<LayerSpec>& specs, uint64_t seed)
    : seed_(seed) {
  if (specs.empty()) throw std::invalid_argument("Network: empty layer list");
  Rng rng(splitmix64(seed ^ 0x7f4a7c15ull));
  int prev = specs.front().in;
  for (const LayerSpec& s : specs) {
    if (s.in != prev) throw std::invalid_argument("Network: adjacent layer dims disagree");
    Layer layer;
    layer.spec = s;
    if (s.kind == LayerKind::kDense) {
      // Uniform fan-in init.
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
      layer.w.resize(s.out, s.in);
      for (int i = 0; i < s.out; ++i)
        for (int j = 0; j < s.in; ++j) layer.w(i, j) = rng.uniform(-bound, bound);
      layer.b = Vector::Zero(s.out);
      layer.gw = Matrix::Zero(s.out, s.in);
      layer.gb = Vector::Zero(s.out);
    } else if (s.kind == LayerKind::kBatchNorm) {
      layer.gamma = Vector::Ones(s.in);
      layer.beta = Vector::Zero(s.in);
      layer.run_mean = Vector::Zero(s.in);
      layer.run_var = Vector::Ones(s.in);
      layer.ggamma = Vector::Zero(s.in);
      layer.gbeta = Vector::Zero(s.in);
    }
    prev = layer.out_dim();
    layers_.push_back(std::move(layer));
  }
}

int Network::input_dim() const { return layers_.front().spec.in; }
int Network::output_dim() const { return layers_.back().out_dim(); }

Matrix Network::forward(const Matrix& batch) {
  if (batch.cols() != input_dim())
    throw std::invalid_argument("tinynet forward: batch width " +
                                std::to_string(batch.cols()) + " != input dim " +
                                std::to_string(input_dim()));
  Matrix x = batch;
  for (Layer& l : layers_) {
    l.x_in = x;
    switch (l.spec.kind) {
      case LayerKind::kDense:
        x = (x * l.w.transpose()).rowwise() + l.b.transpose();
        break;
      case LayerKind::kBatchNorm: {
        if (mode_ == Mode::kTrain) {
          const double n = static_cast<double>(x.rows());
          l.batch_mean = x.colwise().mean();
          Matrix centered = x.rowwise() - l.batch_mean.transpose();
          l.batch_var = centered.cwiseProduct(centered).colwise().sum().transpose() / n;
          Vector inv_std = (l.batch_var.array() + kBatchNormEps).sqrt().inverse();
          l.x_hat = centered * inv_std.asDiagonal();
          l.run_mean = (1.0 - kBatchNormMomentum) * l.run_mean + kBatchNormMomentum * l.batch_mean;
          l.run_var = (1.0 - kBatchNormMomentum) * l.run_var + kBatchNormMomentum * l.batch_var;
        } else {
          Vector inv_std = (l.run_var.array() + kBatchNormEps).sqrt().inverse();
          l.x_hat = (x.rowwise() - l.run_mean.transpose()) * inv_std.asDiagonal();
        }
        x = (l.x_hat * l.gamma.asDiagonal()).rowwise() + l.beta.transpose();
        break;
      }
      case LayerKind::kRelu:
        x = x.cwiseMax(0.0);
        break;
      case LayerKind::kTanh:
        x = x.array().tanh();
        l.y_act = x;
        break;
      case LayerKind::kScaledTanh:
        x = l.spec.scale * x.array().tanh();
        l.y_act = x;
        break;
    }
  }
  recorded_ = true;
  return x;
}

Matrix Network::backward(const Matrix& out_grad) {
  if (!recorded_) throw std::logic_error("tinynet backward: no recorded forward pass");
  Matrix g = out_grad;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    Layer& l = *it;
    switch (l.spec.kind) {
      case LayerKind::kDense:
        l.gw += g.transpose() * l.x_in;
        l.gb += g.colwise().sum().transpose();
        g = g * l.w;
        break;
      case LayerKind::kBatchNorm: {
        Matrix dxhat = g * l.gamma.asDiagonal();
        l.ggamma += g.cwiseProduct(l.x_hat).colwise().sum().transpose();
        l.gbeta += g.colwise().sum().transpose();
        if (mode_ == Mode::kTrain) {
          const double n = static_cast<double>(g.rows());
          Vector inv_std = (l.batch_var.array() + kBatchNormEps).sqrt().inverse();
          // dx = (1/n) inv_std (n dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
          Vector sum_dxhat = dxhat.colwise().sum().transpose();
          Vector sum_dxhat_xhat = dxhat.cwiseProduct(l.x_hat).colwise().sum().transpose();
          Matrix dx = n * dxhat;
          dx.rowwise() -= sum_dxhat.transpose();
          dx -= l.x_hat * sum_dxhat_xhat.asDiagonal();
          g = (dx * inv_std.asDiagonal()) / n;
        } else {
          Vector inv_std = (l.run_var.array() + kBatchNormEps).sqrt().inverse();
          g = dxhat * inv_std.asDiagonal();
        }
        break;
      }
      case LayerKind::kRelu:
        g = (l.x_in.array() > 0.0).select(g, 0.0);
        break;
      case LayerKind::kTanh:
        g = g.array() * (1.0 - l.y_act.array().square());
        break;
      case LayerKind::kScaledTanh: {
        // y = s tanh(x), dy/dx = s (1 - (y/s)^2) = s - y^2/s
        const double s = l.spec.scale;
        g = g.array() * (s - l.y_act.array().square() / s);
        break;
      }
    }
  }
  return g;
}

void Network::zero_grads() {
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kDense) {
      l.gw.setZero();
      l.gb.setZero();
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      l.ggamma.setZero();
      l.gbeta.setZero();
    }
  }
}

std::vector<double*> Network::param_ptrs() {
  std::vector<double*> out;
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kDense) {
      out.push_back(l.w.data());
      out.push_back(l.b.data());
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      out.push_back(l.gamma.data());
      out.push_back(l.beta.data());
    }
  }
  return out;
}

std::vector<double*> Network::grad_ptrs() {
  std::vector<double*> out;
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kDense) {
      out.push_back(l.gw.data());
      out.push_back(l.gb.data());
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      out.push_back(l.ggamma.data());
      out.push_back(l.gbeta.data());
    }
  }
  return out;
}

std::vector<long> Network::param_sizes() const {
  std::vector<long> out;
  for (const Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kDense) {
      out.push_back(l.w.size());
      out.push_back(l.b.size());
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      out.push_back(l.gamma.size());
      out.push_back(l.beta.size());
    }
  }
  return out;
}

long Network::n_params() const {
  long n = 0;
  for (long s : param_sizes()) n += s;
  return n;
}

uint64_t Network::param_checksum() const {
  uint64_t h = 1469598103934665603ull;  // FNV offset basis
  auto mix = [&h](const double* p, long n) {
    for (long i = 0; i < n; ++i) {
      uint64_t bits;
      std::memcpy(&bits, &p[i], sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ull;
      }
    }
  };
  for (const Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kDense) {
      mix(l.w.data(), l.w.size());
      mix(l.b.data(), l.b.size());
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      mix(l.gamma.data(), l.gamma.size());
      mix(l.beta.data(), l.beta.size());
      mix(l.run_mean.data(), l.run_mean.size());
      mix(l.run_var.data(), l.run_var.size());
    }
  }
  return h;
}

void Adam::step(Network& net) {
  auto params = net.param_ptrs();
  auto grads = net.grad_ptrs();
  auto sizes = net.param_sizes();
  if (m_.empty()) {
    for (long s : sizes) {
      m_.emplace_back(Vector::Zero(s));
      v_.emplace_back(Vector::Zero(s));
    }
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("Adam: network shape changed under the optimizer");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t k = 0; k < params.size(); ++k) {
    Eigen::Map<Vector> p(params[k], sizes[k]);
    Eigen::Map<const Vector> g(grads[k], sizes[k]);
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.array().square().matrix();
    p.array() -= lr_ * (m_[k].array() / bc1) /
                 ((v_[k].array() / bc2).sqrt() + eps_);
  }
  net.set_steps(net.steps() + 1);
}

void Adam::reset() {
  m_.clear();
  v_.clear();
  t_ = 0;
}

namespace {

nlohmann::json vec_to_json(const Vector& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  return nlohmann::json(out);
}

nlohmann::json mat_to_json_rowmajor(const Matrix& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return nlohmann::json(out);
}

Vector vec_from_json(const nlohmann::json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Matrix mat_from_json_rowmajor(const nlohmann::json& j, int rows, int cols) {
  if (static_cast<long>(j.size()) != static_cast<long>(rows) * cols)
    throw std::runtime_error("checkpoint: weight size mismatch");
  Matrix m(rows, cols);
  size_t k = 0;
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[k++].get<double>();
  return m;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : net.layers()) {
    nlohmann::json lj;
    lj["kind"] = kind_name(l.spec.kind);
    lj["in"] = l.spec.in;
    lj["out"] = l.spec.out;
    if (l.spec.kind == LayerKind::kScaledTanh) lj["scale"] = l.spec.scale;
    if (l.spec.kind == LayerKind::kDense) {
      lj["w"] = mat_to_json_rowmajor(l.w);
      lj["b"] = vec_to_json(l.b);
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      lj["gamma"] = vec_to_json(l.gamma);
      lj["beta"] = vec_to_json(l.beta);
      lj["run_mean"] = vec_to_json(l.run_mean);
      lj["run_var"] = vec_to_json(l.run_var);
    }
    layers.push_back(lj);
  }
  j["layers"] = layers;
  // `created` is the optimizer step counter, not wall time: artifacts must
  // be byte-identical across reruns of the same seeded command.
  j["meta"] = {{"seed", net.seed()}, {"created", net.steps()}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  f << j.dump(1) << "\n";
  if (!f.good()) throw std::runtime_error("checkpoint: write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint: malformed JSON in " + path + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: version mismatch in " + path);
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw std::runtime_error("checkpoint: missing layers in " + path);

  std::vector<LayerSpec> specs;
  for (const auto& lj : j["layers"]) {
    LayerSpec s;
    s.kind = kind_from_name(lj.at("kind").get<std::string>());
    s.in = lj.at("in").get<int>();
    s.out = lj.at("out").get<int>();
    if (lj.contains("scale")) s.scale = lj["scale"].get<double>();
    specs.push_back(s);
  }
  uint64_t seed = 0;
  long steps = 0;
  if (j.contains("meta")) {
    seed = j["meta"].value("seed", 0ull);
    steps = j["meta"].value("created", 0l);
  }
  Network net(specs, seed);
  net.set_steps(steps);
  auto& layers = net.layers();
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& lj = j["layers"][i];
    Layer& l = layers[i];
    if (l.spec.kind == LayerKind::kDense) {
      l.w = mat_from_json_rowmajor(lj.at("w"), l.spec.out, l.spec.in);
      l.b = vec_from_json(lj.at("b"));
      if (l.b.size() != l.spec.out) throw std::runtime_error("checkpoint: bias size mismatch");
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      l.gamma = vec_from_json(lj.at("gamma"));
      l.beta = vec_from_json(lj.at("beta"));
      l.run_mean = vec_from_json(lj.at("run_mean"));
      l.run_var = vec_from_json(lj.at("run_var"));
      if (l.gamma.size() != l.spec.in || l.run_var.size() != l.spec.in)
        throw std::runtime_error("checkpoint: batchnorm size mismatch");
    }
  }
  net.set_mode(Mode::kEval);
  return net;
}

}  // namespace socnav::tinynet
