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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "socnav/rng.hpp"

namespace socnav {

using tinynet::Matrix;
using tinynet::Mode;

namespace {
constexpr double kNonStationarySpeed = 0.1;  // m/s over the past window
}

PredictorNet::PredictorNet(const PredictorConfig& cfg, uint64_t seed) : cfg_(cfg) {
  const int past_dim = 2 * cfg.horizon * 2;      // h_past + r_past
  const int fut_dim = 2 * cfg.horizon;
  using namespace tinynet;
  fc1_ = Network({dense(past_dim, cfg.hidden), batchnorm(cfg.hidden), relu(cfg.hidden),
                  dense(cfg.hidden, cfg.hidden), batchnorm(cfg.hidden), relu(cfg.hidden),
                  dense(cfg.hidden, cfg.zp_dim)},
                 splitmix64(seed ^ 0xa1ceull));
  fc2_ = Network({dense(cfg.zp_dim + fut_dim, cfg.hidden), batchnorm(cfg.hidden), relu(cfg.hidden),
                  dense(cfg.hidden, cfg.hidden), batchnorm(cfg.hidden), relu(cfg.hidden),
                  dense(cfg.hidden, fut_dim), scaled_tanh(fut_dim, cfg.v_limit)},
                 splitmix64(seed ^ 0xb0b5ull));
}

void PredictorNet::set_mode(Mode m) {
  fc1_.set_mode(m);
  fc2_.set_mode(m);
}

void PredictorNet::zero_grads() {
  fc1_.zero_grads();
  fc2_.zero_grads();
}

uint64_t PredictorNet::checksum() const {
  return fc1_.param_checksum() ^ (fc2_.param_checksum() * 0x9e3779b97f4a7c15ull);
}

Matrix PredictorNet::predict_positions(const Matrix& h_past, const Matrix& r_past,
                                       const Matrix& r_future) {
  const int h = cfg_.horizon;
  if (h_past.cols() != 2 * h || r_past.cols() != 2 * h || r_future.cols() != 2 * h)
    throw std::invalid_argument("predictor: track width mismatch");
  if (h_past.rows() != r_past.rows() || h_past.rows() != r_future.rows())
    throw std::invalid_argument("predictor: batch size mismatch");

  last_hpast_ = h_past;
  last_rpast_ = r_past;
  const long n = h_past.rows();

  Matrix past(n, 4 * h);
  past << h_past, r_past;
  Matrix z = fc1_.forward(past);

  Matrix fut_in(n, cfg_.zp_dim + 2 * h);
  fut_in << z, r_future;
  Matrix vel = fc2_.forward(fut_in);  // N x 2h, bounded by v_limit

  // positions: h_t + cumulative sum of velocity * dt
  Matrix pos(n, 2 * h);
  for (int k = 0; k < h; ++k) {
    if (k == 0) {
      pos.col(0) = h_past.col(2 * h - 2) + cfg_.dt * vel.col(0);
      pos.col(1) = h_past.col(2 * h - 1) + cfg_.dt * vel.col(1);
    } else {
      pos.col(2 * k) = pos.col(2 * k - 2) + cfg_.dt * vel.col(2 * k);
      pos.col(2 * k + 1) = pos.col(2 * k - 1) + cfg_.dt * vel.col(2 * k + 1);
    }
  }
  return pos;
}

Matrix PredictorNet::backward_rfuture(const Matrix& d_positions) {
  const int h = cfg_.horizon;
  const long n = d_positions.rows();
  // Reverse the cumulative sum: dL/dvel_k = dt * sum_{i >= k} dL/dpos_i.
  Matrix dvel(n, 2 * h);
  for (int k = h - 1; k >= 0; --k) {
    if (k == h - 1) {
      dvel.col(2 * k) = cfg_.dt * d_positions.col(2 * k);
      dvel.col(2 * k + 1) = cfg_.dt * d_positions.col(2 * k + 1);
    } else {
      dvel.col(2 * k) = dvel.col(2 * k + 2) + cfg_.dt * d_positions.col(2 * k);
      dvel.col(2 * k + 1) = dvel.col(2 * k + 3) + cfg_.dt * d_positions.col(2 * k + 1);
    }
  }
  Matrix g2 = fc2_.backward(dvel);
  Matrix dz = g2.leftCols(cfg_.zp_dim);
  fc1_.backward(dz);  // accumulates fc1 parameter grads
  return g2.rightCols(2 * h);
}

namespace {

Matrix track_to_row(const Track& t, int horizon) {
  if (static_cast<int>(t.points.size()) != horizon)
    throw std::invalid_argument("predictor: track length mismatch");
  Matrix row(1, 2 * horizon);
  for (int i = 0; i < horizon; ++i) {
    row(0, 2 * i) = t.points[i].x();
    row(0, 2 * i + 1) = t.points[i].y();
  }
  return row;
}

Track row_to_track(const Matrix& row, int horizon, double dt, const std::string& frame) {
  Track t;
  t.dt = dt;
  t.frame = frame;
  t.points.reserve(horizon);
  for (int i = 0; i < horizon; ++i)
    t.points.emplace_back(row(0, 2 * i), row(0, 2 * i + 1));
  return t;
}

}  // namespace

Track PredictorNet::predict_future(const Track& h_past, const Track& r_past,
                                   const Track& r_future) {
  if (!h_past.frame.empty() && !r_past.frame.empty() && h_past.frame != r_past.frame)
    throw std::invalid_argument("predictor: tracks in different frames");
  const Mode m1 = fc1_.mode();
  set_mode(Mode::kEval);
  Matrix pos = predict_positions(track_to_row(h_past, cfg_.horizon),
                                 track_to_row(r_past, cfg_.horizon),
                                 track_to_row(r_future, cfg_.horizon));
  set_mode(m1);
  return row_to_track(pos, cfg_.horizon, h_past.dt, h_past.frame);
}

Track PredictorNet::predict_giveway(const Track& h_past, const Track& r_past) {
  Track zeros;
  zeros.dt = h_past.dt;
  zeros.frame = h_past.frame;
  zeros.points.assign(cfg_.horizon, Eigen::Vector2d::Zero());
  return predict_future(h_past, r_past, zeros);
}

void PredictorNet::save(const std::string& path) const {
  nlohmann::json j;
  j["kind"] = "predictor";
  j["config"] = {{"horizon", cfg_.horizon}, {"dt", cfg_.dt},   {"hidden", cfg_.hidden},
                 {"zp_dim", cfg_.zp_dim},   {"v_limit", cfg_.v_limit}};
  const std::string base = path + ".tmp_net";
  tinynet::save_checkpoint(fc1_, base + "1");
  tinynet::save_checkpoint(fc2_, base + "2");
  std::ifstream f1(base + "1"), f2(base + "2");
  j["fc1"] = nlohmann::json::parse(f1);
  j["fc2"] = nlohmann::json::parse(f2);
  f1.close();
  f2.close();
  std::remove((base + "1").c_str());
  std::remove((base + "2").c_str());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("predictor save: cannot open " + path);
  out << j.dump(1) << "\n";
}

PredictorNet PredictorNet::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("predictor load: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("predictor load: malformed " + path + ": " + e.what());
  }
  if (j.value("kind", "") != "predictor")
    throw std::runtime_error("predictor load: not a predictor checkpoint: " + path);
  PredictorConfig cfg;
  const auto& c = j.at("config");
  cfg.horizon = c.at("horizon").get<int>();
  cfg.dt = c.at("dt").get<double>();
  cfg.hidden = c.at("hidden").get<int>();
  cfg.zp_dim = c.at("zp_dim").get<int>();
  cfg.v_limit = c.at("v_limit").get<double>();

  // Round-trip the embedded nets through the tinynet loader.
  const std::string base = path + ".tmp_net";
  {
    std::ofstream o1(base + "1");
    o1 << j.at("fc1").dump();
  }
  {
    std::ofstream o2(base + "2");
    o2 << j.at("fc2").dump();
  }
  PredictorNet net;
  net.cfg_ = cfg;
  net.fc1_ = tinynet::load_checkpoint(base + "1");
  net.fc2_ = tinynet::load_checkpoint(base + "2");
  std::remove((base + "1").c_str());
  std::remove((base + "2").c_str());
  net.set_mode(Mode::kEval);
  return net;
}

SampleSet build_predictor_samples(const std::vector<Rollout>& rollouts,
                                  const PredictorConfig& cfg, int stride) {
  if (stride < 1) throw std::invalid_argument("build_predictor_samples: stride >= 1");
  const int h = cfg.horizon;
  const int alpha = h - 1;
  SampleSet out;
  for (const Rollout& r : rollouts) {
    const AgentTrace* robot = r.robot();
    if (!robot) continue;
    auto peds = r.pedestrians();
    if (peds.empty()) continue;
    const int len = r.length();
    for (int t = alpha; t + h < len; t += stride) {
      // Nearest pedestrian moving faster than the stationary threshold.
      const AgentTrace* best = nullptr;
      double best_dist = 0.0;
      for (const AgentTrace* p : peds) {
        double mean_speed = 0.0;
        for (int k = t - alpha; k <= t; ++k) mean_speed += p->vel[k].norm();
        mean_speed /= h;
        if (mean_speed <= kNonStationarySpeed) continue;
        const double d = (p->pos[t] - robot->pos[t]).norm();
        if (!best || d < best_dist) {
          best = p;
          best_dist = d;
        }
      }
      if (!best) continue;

      const Pose2 frame = robot->pose_at(t);
      PredictorSample s;
      for (int k = 0; k < h; ++k) {
        const Eigen::Vector2d hp = to_frame_point(best->pos[t - alpha + k], frame);
        const Eigen::Vector2d rp = to_frame_point(robot->pos[t - alpha + k], frame);
        const Eigen::Vector2d rf = to_frame_point(robot->pos[t + 1 + k], frame);
        const Eigen::Vector2d hf = to_frame_point(best->pos[t + 1 + k], frame);
        s.h_past.segment<2>(2 * k) = hp;
        s.r_past.segment<2>(2 * k) = rp;
        s.r_future.segment<2>(2 * k) = rf;
        s.h_future.segment<2>(2 * k) = hf;
      }
      out.push_back(s);
    }
  }
  return out;
}

namespace {

void fill_batch(const SampleSet& set, const std::vector<int>& idx, long row0,
                Matrix& h_past, Matrix& r_past, Matrix& r_future, Matrix& h_future) {
  for (size_t i = 0; i < idx.size(); ++i) {
    const PredictorSample& s = set[idx[i]];
    h_past.row(row0 + i) = s.h_past.transpose();
    r_past.row(row0 + i) = s.r_past.transpose();
    r_future.row(row0 + i) = s.r_future.transpose();
    h_future.row(row0 + i) = s.h_future.transpose();
  }
}

PredictorEval eval_on(PredictorNet& net, const SampleSet& samples,
                      const std::vector<int>& indices) {
  const int h = net.config().horizon;
  net.set_mode(Mode::kEval);
  double se_sum = 0.0;
  double cos_sum = 0.0;
  long n_pos = 0, n_cos = 0;
  const long chunk = 512;
  for (size_t begin = 0; begin < indices.size(); begin += chunk) {
    const long n = std::min<long>(chunk, indices.size() - begin);
    Matrix hp(n, 2 * h), rp(n, 2 * h), rf(n, 2 * h), hf(n, 2 * h);
    std::vector<int> slice(indices.begin() + begin, indices.begin() + begin + n);
    fill_batch(samples, slice, 0, hp, rp, rf, hf);
    Matrix pos = net.predict_positions(hp, rp, rf);
    Matrix current(n, 2);
    current.col(0) = hp.col(2 * h - 2);
    current.col(1) = hp.col(2 * h - 1);
    // Accumulate the same sums prediction_metrics uses, over chunks.
    for (long i = 0; i < n; ++i) {
      for (int k = 0; k < h; ++k) {
        const double ex = pos(i, 2 * k) - hf(i, 2 * k);
        const double ey = pos(i, 2 * k + 1) - hf(i, 2 * k + 1);
        se_sum += ex * ex + ey * ey;
        ++n_pos;
        const Eigen::Vector2d dp(pos(i, 2 * k) - current(i, 0),
                                 pos(i, 2 * k + 1) - current(i, 1));
        const Eigen::Vector2d dtrue(hf(i, 2 * k) - current(i, 0),
                                    hf(i, 2 * k + 1) - current(i, 1));
        if (dp.norm() >= 1e-6 && dtrue.norm() >= 1e-6) {
          cos_sum += dp.dot(dtrue) / (dp.norm() * dtrue.norm());
          ++n_cos;
        }
      }
    }
  }
  PredictorEval ev;
  ev.mse = n_pos ? se_sum / n_pos : 0.0;
  ev.cosine = n_cos ? cos_sum / n_cos : 0.0;
  return ev;
}

}  // namespace

PredictorEval prediction_metrics(const Matrix& predicted, const Matrix& actual,
                                 const Matrix& current) {
  if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols() ||
      predicted.rows() != current.rows())
    throw std::invalid_argument("prediction_metrics: shape mismatch");
  const int h = static_cast<int>(predicted.cols()) / 2;
  double se_sum = 0.0, cos_sum = 0.0;
  long n_pos = 0, n_cos = 0;
  for (long i = 0; i < predicted.rows(); ++i) {
    for (int k = 0; k < h; ++k) {
      const double ex = predicted(i, 2 * k) - actual(i, 2 * k);
      const double ey = predicted(i, 2 * k + 1) - actual(i, 2 * k + 1);
      se_sum += ex * ex + ey * ey;
      ++n_pos;
      const Eigen::Vector2d dp(predicted(i, 2 * k) - current(i, 0),
                               predicted(i, 2 * k + 1) - current(i, 1));
      const Eigen::Vector2d dt(actual(i, 2 * k) - current(i, 0),
                               actual(i, 2 * k + 1) - current(i, 1));
      if (dp.norm() >= 1e-6 && dt.norm() >= 1e-6) {
        cos_sum += dp.dot(dt) / (dp.norm() * dt.norm());
        ++n_cos;
      }
    }
  }
  PredictorEval ev;
  ev.mse = n_pos ? se_sum / n_pos : 0.0;
  ev.cosine = n_cos ? cos_sum / n_cos : 0.0;
  return ev;
}

PredictorEval eval_predictor(PredictorNet& net, const SampleSet& samples) {
  if (samples.empty()) throw std::invalid_argument("eval_predictor: empty sample set");
  std::vector<int> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return eval_on(net, samples, idx);
}

PredictorNet train_predictor(const SampleSet& set_a, const SampleSet& set_b,
                             const PredictorTrainConfig& tc, const PredictorConfig& cfg) {
  if (set_a.empty() || set_b.empty())
    throw std::invalid_argument("train_predictor: empty dataset");
  if (tc.batch < 2) throw std::invalid_argument("train_predictor: batch too small");

  Rng rng(splitmix64(tc.seed ^ 0x9ed1c7ull));
  const int h = cfg.horizon;

  auto split = [&](const SampleSet& set, std::vector<int>& train, std::vector<int>& val) {
    std::vector<int> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_u64() % i]);
    const size_t n_val = std::max<size_t>(1, static_cast<size_t>(tc.val_fraction * idx.size()));
    val.assign(idx.end() - n_val, idx.end());
    train.assign(idx.begin(), idx.end() - n_val);
  };
  std::vector<int> train_a, val_a, train_b, val_b;
  split(set_a, train_a, val_a);
  split(set_b, train_b, val_b);

  PredictorNet net(cfg, splitmix64(tc.seed ^ 0xfeedull));
  tinynet::Adam opt1(tc.lr), opt2(tc.lr);

  const int half = tc.batch / 2;
  const long steps = std::min<long>(tc.max_steps_per_epoch,
                                    std::max<long>(1, (train_a.size() + train_b.size()) / tc.batch));

  std::FILE* curve = nullptr;
  if (!tc.curve_path.empty()) {
    curve = std::fopen(tc.curve_path.c_str(), "w");
    if (!curve) throw std::runtime_error("train_predictor: cannot open curve file " + tc.curve_path);
    std::fputs("epoch,train_mse,val_mse,val_cosine\n", curve);
  }

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = tc.lr * std::pow(tc.lr_decay, epoch);
    opt1.set_lr(lr);
    opt2.set_lr(lr);
    net.set_mode(Mode::kTrain);
    double train_loss = 0.0;
    for (long step = 0; step < steps; ++step) {
      std::vector<int> ia(half), ib(tc.batch - half);
      for (int& v : ia) v = train_a[rng.next_u64() % train_a.size()];
      for (int& v : ib) v = train_b[rng.next_u64() % train_b.size()];

      Matrix hp(tc.batch, 2 * h), rp(tc.batch, 2 * h), rf(tc.batch, 2 * h), hf(tc.batch, 2 * h);
      fill_batch(set_a, ia, 0, hp, rp, rf, hf);
      fill_batch(set_b, ib, half, hp, rp, rf, hf);

      net.zero_grads();
      Matrix pos = net.predict_positions(hp, rp, rf);
      Matrix err = pos - hf;
      const double loss = err.squaredNorm() / (tc.batch * h);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_predictor: non-finite loss at epoch " +
                                 std::to_string(epoch) + " step " + std::to_string(step));
      train_loss += loss;
      Matrix dpos = 2.0 * err / (tc.batch * h);
      net.backward_rfuture(dpos);
      opt1.step(net.fc1());
      opt2.step(net.fc2());
    }
    train_loss /= steps;

    SampleSet val_samples;
    for (int i : val_a) val_samples.push_back(set_a[i]);
    for (int i : val_b) val_samples.push_back(set_b[i]);
    PredictorEval ev = eval_on(net, val_samples, [&] {
      std::vector<int> idx(val_samples.size());
      std::iota(idx.begin(), idx.end(), 0);
      return idx;
    }());
    if (curve)
      std::fprintf(curve, "%d,%.12g,%.12g,%.12g\n", epoch, train_loss, ev.mse, ev.cosine);
  }
  if (curve) std::fclose(curve);
  net.set_mode(Mode::kEval);
  return net;
}

}  // namespace socnav
