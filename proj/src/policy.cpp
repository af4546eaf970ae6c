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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "socnav/autonomy.hpp"
#include "socnav/rng.hpp"

namespace socnav {

using tinynet::Matrix;
using tinynet::Mode;

void ObjectiveWeights::validate() const {
  if (w_c < 0 || w_r < 0 || w_cp < 0 || w_ps < 0 || w_i < 0)
    throw std::invalid_argument("ObjectiveWeights: weights must be >= 0");
  if (r_h <= 0 || r_r <= 0)
    throw std::invalid_argument("ObjectiveWeights: radii must be > 0");
}

// --- PolicyNet -------------------------------------------------------------

PolicyNet::PolicyNet(const PolicyConfig& cfg, uint64_t seed) : cfg_(cfg) {
  using namespace tinynet;
  const int in = cfg.obs_dim();
  const int out = 2 * cfg.n_s;
  net_ = Network({dense(in, cfg.hidden), batchnorm(cfg.hidden), relu(cfg.hidden),
                  dense(cfg.hidden, cfg.hidden), batchnorm(cfg.hidden), relu(cfg.hidden),
                  dense(cfg.hidden, out), tanh_layer(out)},
                 splitmix64(seed ^ 0x90CCull));
}

Eigen::VectorXd PolicyNet::encode(const PolicyObservation& obs) const {
  if (static_cast<int>(obs.odom_past.size()) != cfg_.n_p + 1)
    throw std::invalid_argument("policy encode: odom_past must have n_p + 1 points");
  if (obs.ped_valid && static_cast<int>(obs.ped_past.size()) != 8)
    throw std::invalid_argument("policy encode: ped_past must have 8 points");
  if (static_cast<int>(obs.rays.size()) != cfg_.n_rays)
    throw std::invalid_argument("policy encode: wrong ray count");

  Eigen::VectorXd x(cfg_.obs_dim());
  long k = 0;
  x[k++] = obs.goal_rel.x;
  x[k++] = obs.goal_rel.y;
  x[k++] = std::cos(obs.goal_rel.theta);
  x[k++] = std::sin(obs.goal_rel.theta);
  for (const auto& p : obs.odom_past) {
    x[k++] = p.x();
    x[k++] = p.y();
  }
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector2d p =
        obs.ped_valid ? obs.ped_past[i] : Eigen::Vector2d::Zero();
    x[k++] = p.x();
    x[k++] = p.y();
  }
  x[k++] = obs.ped_valid ? 1.0 : 0.0;
  for (double r : obs.rays) x[k++] = r;
  if (!x.allFinite()) throw std::invalid_argument("policy encode: non-finite observation");
  return x;
}

std::vector<Twist> PolicyNet::decode(const Eigen::VectorXd& raw) const {
  std::vector<Twist> out(cfg_.n_s);
  for (int i = 0; i < cfg_.n_s; ++i) {
    out[i].v = cfg_.v_max * (raw[2 * i] + 1.0) / 2.0;
    out[i].omega = cfg_.omega_max * raw[2 * i + 1];
  }
  return out;
}

std::vector<Twist> PolicyNet::forward(const PolicyObservation& obs) {
  const Mode prev = net_.mode();
  net_.set_mode(Mode::kEval);
  Matrix raw = net_.forward(encode(obs).transpose());
  net_.set_mode(prev);
  return decode(raw.row(0).transpose());
}

Matrix PolicyNet::forward_raw(const Matrix& obs_batch) { return net_.forward(obs_batch); }

void PolicyNet::save(const std::string& path) const {
  nlohmann::json j;
  j["kind"] = "policy";
  j["config"] = {{"n_s", cfg_.n_s},       {"n_p", cfg_.n_p},
                 {"n_rays", cfg_.n_rays}, {"dt", cfg_.dt},
                 {"v_max", cfg_.v_max},   {"omega_max", cfg_.omega_max},
                 {"ray_cap", cfg_.ray_cap}, {"hidden", cfg_.hidden}};
  const std::string tmp = path + ".tmp_net";
  tinynet::save_checkpoint(net_, tmp);
  std::ifstream f(tmp);
  j["net"] = nlohmann::json::parse(f);
  f.close();
  std::remove(tmp.c_str());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("policy save: cannot open " + path);
  out << j.dump(1) << "\n";
}

PolicyNet PolicyNet::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("policy load: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("policy load: malformed " + path + ": " + e.what());
  }
  if (j.value("kind", "") != "policy")
    throw std::runtime_error("policy load: not a policy checkpoint: " + path);
  PolicyNet net;
  const auto& c = j.at("config");
  net.cfg_.n_s = c.at("n_s").get<int>();
  net.cfg_.n_p = c.at("n_p").get<int>();
  net.cfg_.n_rays = c.at("n_rays").get<int>();
  net.cfg_.dt = c.at("dt").get<double>();
  net.cfg_.v_max = c.at("v_max").get<double>();
  net.cfg_.omega_max = c.at("omega_max").get<double>();
  net.cfg_.ray_cap = c.at("ray_cap").get<double>();
  net.cfg_.hidden = c.at("hidden").get<int>();
  const std::string tmp = path + ".tmp_net";
  {
    std::ofstream o(tmp);
    o << j.at("net").dump();
  }
  net.net_ = tinynet::load_checkpoint(tmp);
  std::remove(tmp.c_str());
  net.net_.set_mode(Mode::kEval);
  return net;
}

// --- Rollout adjoint -------------------------------------------------------

TwistRollout rollout_twists(const std::vector<Twist>& twists, double dt) {
  TwistRollout ro;
  const size_t n = twists.size();
  ro.theta.resize(n + 1);
  ro.pos.resize(n + 1);
  ro.theta[0] = 0.0;
  ro.pos[0].setZero();
  for (size_t i = 1; i <= n; ++i) {
    const double th = ro.theta[i - 1];
    ro.pos[i] = ro.pos[i - 1] +
                twists[i - 1].v * dt * Eigen::Vector2d(std::cos(th), std::sin(th));
    ro.theta[i] = th + twists[i - 1].omega * dt;
  }
  return ro;
}

Eigen::MatrixX2d rollout_backward(const TwistRollout& ro,
                                  const std::vector<Twist>& twists,
                                  const std::vector<Eigen::Vector2d>& d_pos,
                                  double d_theta_final, double dt) {
  const size_t n = twists.size();
  if (d_pos.size() != n)
    throw std::invalid_argument("rollout_backward: d_pos must have one entry per twist");
  Eigen::MatrixX2d grad = Eigen::MatrixX2d::Zero(n, 2);
  Eigen::Vector2d adj_p = Eigen::Vector2d::Zero();
  double adj_th = 0.0;
  for (size_t i = n; i >= 1; --i) {
    const Eigen::Vector2d dp = d_pos[i - 1] + adj_p;
    const double dth = (i == n ? d_theta_final : 0.0) + adj_th;
    const double th_prev = ro.theta[i - 1];
    const double c = std::cos(th_prev), s = std::sin(th_prev);
    grad(i - 1, 0) = dt * (c * dp.x() + s * dp.y());
    grad(i - 1, 1) = dt * dth;
    adj_p = dp;
    adj_th = dth + twists[i - 1].v * dt * (-s * dp.x() + c * dp.y());
  }
  return grad;
}

// --- Objectives ------------------------------------------------------------

Objective j_pose(const std::vector<Twist>& twists, const Pose2& goal_rel, double dt,
                 double heading_weight) {
  TwistRollout ro = rollout_twists(twists, dt);
  const size_t n = twists.size();
  const Eigen::Vector2d err(ro.pos[n].x() - goal_rel.x, ro.pos[n].y() - goal_rel.y);
  const double dth = normalize_angle(ro.theta[n] - goal_rel.theta);

  Objective out;
  out.value = err.squaredNorm() + heading_weight * dth * dth;
  std::vector<Eigen::Vector2d> d_pos(n, Eigen::Vector2d::Zero());
  d_pos[n - 1] = 2.0 * err;
  out.d_twists = rollout_backward(ro, twists, d_pos, 2.0 * heading_weight * dth, dt);
  return out;
}

Objective j_col(const std::vector<Twist>& twists,
                const std::vector<Eigen::Vector2d>& obstacle_points, double dt,
                double r_r, double margin) {
  const size_t n = twists.size();
  Objective out;
  out.d_twists = Eigen::MatrixX2d::Zero(n, 2);
  if (obstacle_points.empty()) return out;

  TwistRollout ro = rollout_twists(twists, dt);
  std::vector<Eigen::Vector2d> d_pos(n, Eigen::Vector2d::Zero());
  const double reach = r_r + margin;
  for (size_t i = 1; i <= n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector2d best_pt = Eigen::Vector2d::Zero();
    for (const auto& o : obstacle_points) {
      const double d = (ro.pos[i] - o).norm();
      if (d < best) {
        best = d;
        best_pt = o;
      }
    }
    const double hinge = reach - best;
    if (hinge > 0.0) {
      out.value += hinge * hinge;
      if (best > 1e-9)
        d_pos[i - 1] += -2.0 * hinge * (ro.pos[i] - best_pt) / best;
    }
  }
  out.d_twists = rollout_backward(ro, twists, d_pos, 0.0, dt);
  return out;
}

Objective j_reg(const std::vector<Twist>& twists) {
  const size_t n = twists.size();
  Objective out;
  out.d_twists = Eigen::MatrixX2d::Zero(n, 2);
  if (n == 0) return out;

  double diff_sum = 0.0;
  if (n > 1) {
    for (size_t i = 0; i + 1 < n; ++i) {
      const double dv = twists[i + 1].v - twists[i].v;
      const double dw = twists[i + 1].omega - twists[i].omega;
      diff_sum += dv * dv + dw * dw;
      const double scale = 2.0 / static_cast<double>(n - 1);
      out.d_twists(i + 1, 0) += scale * dv;
      out.d_twists(i, 0) -= scale * dv;
      out.d_twists(i + 1, 1) += scale * dw;
      out.d_twists(i, 1) -= scale * dw;
    }
    diff_sum /= static_cast<double>(n - 1);
  }
  double w_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    w_sum += twists[i].omega * twists[i].omega;
    out.d_twists(i, 1) += 2.0 * twists[i].omega / static_cast<double>(n);
  }
  w_sum /= static_cast<double>(n);
  out.value = diff_sum + w_sum;
  return out;
}

namespace {

Matrix flatten_positions(const TwistRollout& ro, int n_s) {
  Matrix row(1, 2 * n_s);
  for (int i = 0; i < n_s; ++i) {
    row(0, 2 * i) = ro.pos[i + 1].x();
    row(0, 2 * i + 1) = ro.pos[i + 1].y();
  }
  return row;
}

}  // namespace

Objective j_cp(PredictorNet& predictor, const Eigen::Matrix<double, 16, 1>& h_past,
               const Eigen::Matrix<double, 16, 1>& r_past,
               const std::vector<Twist>& twists, double dt, bool ped_valid) {
  const int n = static_cast<int>(twists.size());
  Objective out;
  out.d_twists = Eigen::MatrixX2d::Zero(n, 2);
  if (!ped_valid) return out;

  predictor.set_mode(Mode::kEval);
  TwistRollout ro = rollout_twists(twists, dt);
  Matrix hp = h_past.transpose();
  Matrix rp = r_past.transpose();
  Matrix giveway = predictor.predict_positions(hp, rp, Matrix::Zero(1, 2 * n));
  Matrix cond = predictor.predict_positions(hp, rp, flatten_positions(ro, n));

  Matrix gap = giveway - cond;
  out.value = gap.squaredNorm() / n;

  predictor.zero_grads();
  Matrix d_cond = (2.0 / n) * (cond - giveway);
  Matrix d_rfut = predictor.backward_rfuture(d_cond);
  std::vector<Eigen::Vector2d> d_pos(n);
  for (int i = 0; i < n; ++i) d_pos[i] = {d_rfut(0, 2 * i), d_rfut(0, 2 * i + 1)};
  out.d_twists = rollout_backward(ro, twists, d_pos, 0.0, dt);
  return out;
}

namespace {

// Personal-space terms |R_h + R_r - c(d_i)| with the clamp's subgradient.
struct PsTerms {
  double value = 0.0;
  // d(value)/d(d_i) for each step; zero outside the clamp's active range.
  std::vector<double> d_dist;
};

PsTerms ps_terms(const std::vector<double>& dists, PsVariant variant, double rh_rr) {
  const size_t n = dists.size();
  PsTerms out;
  out.d_dist.assign(n, 0.0);
  std::vector<double> term(n);
  std::vector<double> slope(n);  // d(term)/d(d_i)
  for (size_t i = 0; i < n; ++i) {
    const double c = clamp_distance(dists[i], rh_rr);
    term[i] = std::abs(rh_rr - c);
    slope[i] = (dists[i] > 0.0 && dists[i] < rh_rr) ? -1.0 : 0.0;
  }
  switch (variant) {
    case PsVariant::kLiteralMin: {
      size_t best = 0;
      for (size_t i = 1; i < n; ++i)
        if (term[i] < term[best]) best = i;
      out.value = term[best];
      out.d_dist[best] = slope[best];
      break;
    }
    case PsVariant::kMean: {
      for (size_t i = 0; i < n; ++i) {
        out.value += term[i] / n;
        out.d_dist[i] = slope[i] / static_cast<double>(n);
      }
      break;
    }
    case PsVariant::kMaxPenetration: {
      size_t best = 0;
      for (size_t i = 1; i < n; ++i)
        if (term[i] > term[best]) best = i;
      out.value = term[best];
      out.d_dist[best] = slope[best];
      break;
    }
  }
  return out;
}

}  // namespace

Objective j_ps(const Track& h_hat, const std::vector<Twist>& twists, double dt,
               const ObjectiveWeights& weights, bool ped_valid) {
  const int n = static_cast<int>(twists.size());
  Objective out;
  out.d_twists = Eigen::MatrixX2d::Zero(n, 2);
  if (!ped_valid) return out;
  if (static_cast<int>(h_hat.points.size()) != n)
    throw std::invalid_argument("j_ps: prediction length mismatch");

  TwistRollout ro = rollout_twists(twists, dt);
  std::vector<double> dists(n);
  for (int i = 0; i < n; ++i) dists[i] = (h_hat.points[i] - ro.pos[i + 1]).norm();
  PsTerms terms = ps_terms(dists, weights.ps_variant, weights.rh_rr());
  out.value = terms.value;

  std::vector<Eigen::Vector2d> d_pos(n, Eigen::Vector2d::Zero());
  for (int i = 0; i < n; ++i) {
    if (terms.d_dist[i] != 0.0 && dists[i] > 1e-9)
      d_pos[i] = terms.d_dist[i] * (ro.pos[i + 1] - h_hat.points[i]) / dists[i];
  }
  out.d_twists = rollout_backward(ro, twists, d_pos, 0.0, dt);
  return out;
}

Objective j_int(const std::vector<Twist>& twists,
                const std::vector<Eigen::Vector2d>& h_future_true, double dt,
                bool ped_valid) {
  const int n = static_cast<int>(twists.size());
  Objective out;
  out.d_twists = Eigen::MatrixX2d::Zero(n, 2);
  if (!ped_valid || h_future_true.empty()) return out;
  if (static_cast<int>(h_future_true.size()) < n)
    throw std::invalid_argument("j_int: pedestrian future shorter than the horizon");

  TwistRollout ro = rollout_twists(twists, dt);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double d = (ro.pos[i + 1] - h_future_true[i]).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  out.value = best_d;
  std::vector<Eigen::Vector2d> d_pos(n, Eigen::Vector2d::Zero());
  if (best_d > 1e-9)
    d_pos[best] = (ro.pos[best + 1] - h_future_true[best]) / best_d;
  out.d_twists = rollout_backward(ro, twists, d_pos, 0.0, dt);
  return out;
}

double combine_social(double j_nav, double j_cp_value, double j_ps_value,
                      const ObjectiveWeights& w) {
  return j_nav + w.w_cp * j_cp_value + w.w_ps * j_ps_value;
}

double combine_collect(double j_nav, double j_int_value, const ObjectiveWeights& w) {
  return j_nav + w.w_i * j_int_value;
}

// --- Batched total loss ----------------------------------------------------

namespace {

std::vector<Twist> row_to_twists(const Matrix& flat, long row, int n_s) {
  std::vector<Twist> out(n_s);
  for (int i = 0; i < n_s; ++i) {
    out[i].v = flat(row, 2 * i);
    out[i].omega = flat(row, 2 * i + 1);
  }
  return out;
}

}  // namespace

LossParts policy_loss_batch(PolicyMode mode, PredictorNet* predictor,
                            const std::vector<PolicySample>& samples,
                            const Matrix& twists_flat, const ObjectiveWeights& weights,
                            const PolicyConfig& cfg, Matrix* d_twists_out) {
  weights.validate();
  const long n = static_cast<long>(samples.size());
  const int n_s = cfg.n_s;
  if (twists_flat.rows() != n || twists_flat.cols() != 2 * n_s)
    throw std::invalid_argument("policy_loss_batch: twist matrix shape mismatch");
  if (mode == PolicyMode::kSocial && !predictor)
    throw std::invalid_argument("policy_loss_batch: social mode requires a predictor");

  LossParts parts;
  Matrix d_twists = Matrix::Zero(n, 2 * n_s);

  // Per-sample rollouts and the direct (non-predictor) objectives.
  std::vector<TwistRollout> rollouts(n);
  std::vector<std::vector<Twist>> twists(n);
  std::vector<std::vector<Eigen::Vector2d>> d_pos(n);  // accumulated position grads
  std::vector<double> d_theta_final(n, 0.0);

  // Rows of the predictor batch for samples with a valid pedestrian.
  std::vector<long> pred_rows(n, -1);
  long n_pred = 0;
  const bool use_pred =
      mode == PolicyMode::kSocial && predictor && (weights.w_cp > 0 || weights.w_ps > 0);
  if (use_pred)
    for (long b = 0; b < n; ++b)
      if (samples[b].obs.ped_valid) pred_rows[b] = n_pred++;

  Matrix hp(std::max<long>(n_pred, 1), 2 * n_s), rp(std::max<long>(n_pred, 1), 2 * n_s),
      rf(std::max<long>(n_pred, 1), 2 * n_s);

  for (long b = 0; b < n; ++b) {
    const PolicySample& s = samples[b];
    twists[b] = row_to_twists(twists_flat, b, n_s);
    rollouts[b] = rollout_twists(twists[b], cfg.dt);
    d_pos[b].assign(n_s, Eigen::Vector2d::Zero());

    // j_pose
    {
      const Eigen::Vector2d err(rollouts[b].pos[n_s].x() - s.obs.goal_rel.x,
                                rollouts[b].pos[n_s].y() - s.obs.goal_rel.y);
      const double dth = normalize_angle(rollouts[b].theta[n_s] - s.obs.goal_rel.theta);
      parts.j_pose += err.squaredNorm() + 0.1 * dth * dth;
      d_pos[b][n_s - 1] += 2.0 * err;
      d_theta_final[b] += 2.0 * 0.1 * dth;
    }
    // j_col
    if (!s.obstacle_points.empty() && weights.w_c > 0) {
      const double reach = weights.r_r + 0.05;
      for (int i = 1; i <= n_s; ++i) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Vector2d best_pt = Eigen::Vector2d::Zero();
        for (const auto& o : s.obstacle_points) {
          const double d = (rollouts[b].pos[i] - o).norm();
          if (d < best) {
            best = d;
            best_pt = o;
          }
        }
        const double hinge = reach - best;
        if (hinge > 0.0) {
          parts.j_col += hinge * hinge;
          if (best > 1e-9)
            d_pos[b][i - 1] += weights.w_c * -2.0 * hinge *
                               (rollouts[b].pos[i] - best_pt) / best;
        }
      }
    }
    // j_reg
    {
      Objective reg = j_reg(twists[b]);
      parts.j_reg += reg.value;
      for (int i = 0; i < n_s; ++i) {
        d_twists(b, 2 * i) += weights.w_r * reg.d_twists(i, 0);
        d_twists(b, 2 * i + 1) += weights.w_r * reg.d_twists(i, 1);
      }
    }
    // j_int (collection objective)
    if (mode == PolicyMode::kCollect && weights.w_i > 0 && s.obs.ped_valid &&
        !s.h_future.empty()) {
      Objective ji = j_int(twists[b], s.h_future, cfg.dt, true);
      parts.j_int += ji.value;
      for (int i = 0; i < n_s; ++i) {
        d_twists(b, 2 * i) += weights.w_i * ji.d_twists(i, 0);
        d_twists(b, 2 * i + 1) += weights.w_i * ji.d_twists(i, 1);
      }
    }
    if (pred_rows[b] >= 0) {
      hp.row(pred_rows[b]) = s.h_past.transpose();
      rp.row(pred_rows[b]) = s.r_past.transpose();
      rf.row(pred_rows[b]) = flatten_positions(rollouts[b], n_s);
    }
  }

  // Counterfactual and personal-space terms through the frozen predictor.
  if (use_pred && n_pred > 0) {
    predictor->set_mode(Mode::kEval);
    Matrix hp_used = hp.topRows(n_pred);
    Matrix rp_used = rp.topRows(n_pred);
    Matrix giveway =
        predictor->predict_positions(hp_used, rp_used, Matrix::Zero(n_pred, 2 * n_s));
    Matrix cond = predictor->predict_positions(hp_used, rp_used, rf.topRows(n_pred));
    Matrix d_cond = Matrix::Zero(n_pred, 2 * n_s);

    for (long b = 0; b < n; ++b) {
      const long r = pred_rows[b];
      if (r < 0) continue;
      // j_cp: mean squared gap between give-way and conditioned predictions.
      double cp = 0.0;
      for (int i = 0; i < n_s; ++i) {
        const double gx = giveway(r, 2 * i) - cond(r, 2 * i);
        const double gy = giveway(r, 2 * i + 1) - cond(r, 2 * i + 1);
        cp += gx * gx + gy * gy;
        d_cond(r, 2 * i) += weights.w_cp * (2.0 / n_s) * (cond(r, 2 * i) - giveway(r, 2 * i));
        d_cond(r, 2 * i + 1) +=
            weights.w_cp * (2.0 / n_s) * (cond(r, 2 * i + 1) - giveway(r, 2 * i + 1));
      }
      parts.j_cp += cp / n_s;

      // j_ps on the conditioned prediction.
      std::vector<double> dists(n_s);
      for (int i = 0; i < n_s; ++i) {
        const Eigen::Vector2d hhat(cond(r, 2 * i), cond(r, 2 * i + 1));
        dists[i] = (hhat - rollouts[b].pos[i + 1]).norm();
      }
      PsTerms terms = ps_terms(dists, weights.ps_variant, weights.rh_rr());
      parts.j_ps += terms.value;
      for (int i = 0; i < n_s; ++i) {
        if (terms.d_dist[i] == 0.0 || dists[i] <= 1e-9) continue;
        const Eigen::Vector2d hhat(cond(r, 2 * i), cond(r, 2 * i + 1));
        const Eigen::Vector2d dir = (rollouts[b].pos[i + 1] - hhat) / dists[i];
        // Robot-position side.
        d_pos[b][i] += weights.w_ps * terms.d_dist[i] * dir;
        // Prediction side (opposite sign), flows back through the predictor.
        d_cond(r, 2 * i) += weights.w_ps * terms.d_dist[i] * -dir.x();
        d_cond(r, 2 * i + 1) += weights.w_ps * terms.d_dist[i] * -dir.y();
      }
    }

    predictor->zero_grads();
    Matrix d_rfut = predictor->backward_rfuture(d_cond);
    for (long b = 0; b < n; ++b) {
      const long r = pred_rows[b];
      if (r < 0) continue;
      for (int i = 0; i < n_s; ++i)
        d_pos[b][i] += Eigen::Vector2d(d_rfut(r, 2 * i), d_rfut(r, 2 * i + 1));
    }
  }

  // Close the chain: positions/heading back to twists. The j_pose grads were
  // accumulated unweighted (weight 1), matching the navigation objective.
  for (long b = 0; b < n; ++b) {
    Eigen::MatrixX2d g =
        rollout_backward(rollouts[b], twists[b], d_pos[b], d_theta_final[b], cfg.dt);
    for (int i = 0; i < n_s; ++i) {
      d_twists(b, 2 * i) += g(i, 0);
      d_twists(b, 2 * i + 1) += g(i, 1);
    }
  }

  parts.j_pose /= n;
  parts.j_col /= n;
  parts.j_reg /= n;
  parts.j_cp /= n;
  parts.j_ps /= n;
  parts.j_int /= n;
  const double j_nav = parts.j_pose + weights.w_c * parts.j_col + weights.w_r * parts.j_reg;
  parts.total = mode == PolicyMode::kSocial
                    ? combine_social(j_nav, parts.j_cp, parts.j_ps, weights)
                    : combine_collect(j_nav, parts.j_int, weights);

  if (d_twists_out) *d_twists_out = d_twists / static_cast<double>(n);
  return parts;
}

double policy_loss_value(PolicyMode mode, PredictorNet* predictor,
                         const PolicySample& sample, const std::vector<Twist>& twists,
                         const ObjectiveWeights& weights, const PolicyConfig& cfg) {
  Matrix flat(1, 2 * cfg.n_s);
  for (int i = 0; i < cfg.n_s; ++i) {
    flat(0, 2 * i) = twists[i].v;
    flat(0, 2 * i + 1) = twists[i].omega;
  }
  return policy_loss_batch(mode, predictor, {sample}, flat, weights, cfg, nullptr).total;
}

Eigen::MatrixX2d policy_loss_grad(PolicyMode mode, PredictorNet* predictor,
                                  const PolicySample& sample,
                                  const std::vector<Twist>& twists,
                                  const ObjectiveWeights& weights,
                                  const PolicyConfig& cfg) {
  Matrix flat(1, 2 * cfg.n_s);
  for (int i = 0; i < cfg.n_s; ++i) {
    flat(0, 2 * i) = twists[i].v;
    flat(0, 2 * i + 1) = twists[i].omega;
  }
  Matrix d;
  policy_loss_batch(mode, predictor, {sample}, flat, weights, cfg, &d);
  Eigen::MatrixX2d out(cfg.n_s, 2);
  for (int i = 0; i < cfg.n_s; ++i) {
    out(i, 0) = d(0, 2 * i);
    out(i, 1) = d(0, 2 * i + 1);
  }
  return out;
}

// --- Sample assembly and training -------------------------------------------

PolicyCorpus corpus_from_rollouts(std::vector<Rollout> rollouts) {
  PolicyCorpus out;
  out.reserve(rollouts.size());
  for (Rollout& r : rollouts) out.push_back({std::move(r), MapSpec{}});
  return out;
}

PolicyCorpus load_policy_corpus(const std::string& csv_path) {
  PolicyCorpus corpus = corpus_from_rollouts(read_scenario_csv(csv_path));
  const std::string sidecar = csv_path + ".obstacles.json";
  if (std::filesystem::exists(sidecar)) {
    std::vector<MapSpec> maps = read_map_json(sidecar);
    for (size_t i = 0; i < corpus.size() && i < maps.size(); ++i)
      corpus[i].map = maps[i];
  }
  return corpus;
}

namespace {

constexpr int kHistory = 8;  // pedestrian/robot past window

// Builds the observation context at step t of a rollout. Returns false if a
// pedestrian future is unavailable.
bool sample_at(const PolicyCorpusEntry& entry, int t, const PolicyConfig& cfg,
               PolicySample& out) {
  const AgentTrace* robot = entry.rollout.robot();
  if (!robot) return false;
  const int len = entry.rollout.length();
  if (t < kHistory - 1 || t < cfg.n_p || t + cfg.n_s >= len) return false;

  const Pose2 frame = robot->pose_at(t);
  out.obs.odom_past.clear();
  for (int k = t - cfg.n_p; k <= t; ++k)
    out.obs.odom_past.push_back(to_frame_point(robot->pos[k], frame));

  out.obs.rays = entry.map.empty()
                     ? std::vector<double>(cfg.n_rays, cfg.ray_cap)
                     : cast_rays(entry.map, frame, cfg.n_rays, cfg.ray_cap);
  out.obstacle_points.clear();
  for (int k = 0; k < cfg.n_rays; ++k) {
    if (out.obs.rays[k] < cfg.ray_cap - 1e-9) {
      const double a = 2.0 * M_PI * k / cfg.n_rays;
      out.obstacle_points.emplace_back(out.obs.rays[k] * std::cos(a),
                                       out.obs.rays[k] * std::sin(a));
    }
  }

  // Nearest non-stationary pedestrian.
  const AgentTrace* best = nullptr;
  double best_dist = 0.0;
  for (const AgentTrace* p : entry.rollout.pedestrians()) {
    double mean_speed = 0.0;
    for (int k = t - (kHistory - 1); k <= t; ++k) mean_speed += p->vel[k].norm();
    mean_speed /= kHistory;
    if (mean_speed <= 0.1) continue;
    const double d = (p->pos[t] - robot->pos[t]).norm();
    if (!best || d < best_dist) {
      best = p;
      best_dist = d;
    }
  }
  out.obs.ped_valid = best != nullptr;
  out.obs.ped_past.assign(kHistory, Eigen::Vector2d::Zero());
  out.h_future.clear();
  if (best) {
    for (int k = 0; k < kHistory; ++k) {
      const Eigen::Vector2d hp = to_frame_point(best->pos[t - (kHistory - 1) + k], frame);
      out.obs.ped_past[k] = hp;
      out.h_past.segment<2>(2 * k) = hp;
      out.r_past.segment<2>(2 * k) =
          to_frame_point(robot->pos[t - (kHistory - 1) + k], frame);
    }
    for (int k = 1; k <= cfg.n_s; ++k)
      out.h_future.push_back(to_frame_point(best->pos[t + k], frame));
  }
  return true;
}

struct PairSampler {
  const PolicyCorpus* corpus = nullptr;
  const PolicyConfig* cfg = nullptr;
  std::vector<int> usable;            // entries long enough to sample from
  std::vector<OdomSequence> seqs;     // per-entry, shared virtual anchor
  std::vector<int> chainable;         // entries whose sequence saw the anchor

  PairSampler(const PolicyCorpus& c, const PolicyConfig& p) : corpus(&c), cfg(&p) {
    // Virtual anchor at the centroid of all robot positions: every recorded
    // route passes near it, mimicking a tag placed on the common route.
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    long n_pts = 0;
    for (const auto& e : c) {
      if (const AgentTrace* r = e.rollout.robot()) {
        for (const auto& p2 : r->pos) {
          centroid += p2;
          ++n_pts;
        }
      }
    }
    if (n_pts > 0) centroid /= static_cast<double>(n_pts);
    const Pose2 anchor{centroid.x(), centroid.y(), 0.0};

    for (size_t i = 0; i < c.size(); ++i) {
      const AgentTrace* r = c[i].rollout.robot();
      seqs.emplace_back();
      if (!r) continue;
      const int len = c[i].rollout.length();
      if (len < kHistory + p.n_s + 2) continue;
      usable.push_back(static_cast<int>(i));
      std::vector<Pose2> poses;
      poses.reserve(len);
      for (int t = 0; t < len; ++t) poses.push_back(r->pose_at(t));
      seqs[i] = sequence_from_poses(poses, anchor, /*n_ar=*/0, /*noise=*/0.0,
                                    /*seed=*/i, /*detect_range=*/5.0);
      if (seqs[i].find_anchor(0)) chainable.push_back(static_cast<int>(i));
    }
    if (usable.empty())
      throw std::invalid_argument("train_policy: corpus has no usable rollouts");
  }

  bool draw_same(Rng& rng, const PolicyTrainConfig& tc, PolicySample& out) const {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const int e = usable[rng.next_u64() % usable.size()];
      const auto& entry = (*corpus)[e];
      const int len = entry.rollout.length();
      const int t_lo = std::max(kHistory - 1, cfg->n_p);
      const int t_hi = len - cfg->n_s - 1;
      if (t_hi <= t_lo) continue;
      const int t = rng.uniform_int(t_lo, t_hi);
      if (!sample_at(entry, t, *cfg, out)) continue;
      const AgentTrace* robot = entry.rollout.robot();
      const int k_hi = std::min(len - 1 - t, tc.goal_horizon_max);
      if (k_hi < tc.goal_horizon_min) continue;
      const int k = rng.uniform_int(tc.goal_horizon_min, k_hi);
      out.obs.goal_rel = relative_pose(robot->pose_at(t), robot->pose_at(t + k));
      return true;
    }
    return false;
  }

  bool draw_cross(Rng& rng, PolicySample& out) const {
    if (chainable.size() < 2) return false;
    for (int attempt = 0; attempt < 20; ++attempt) {
      const int ec = chainable[rng.next_u64() % chainable.size()];
      int eg = chainable[rng.next_u64() % chainable.size()];
      if (eg == ec) continue;
      ChainedPair pair = sample_chained_pair(seqs[ec], seqs[eg], 0, rng);
      if (!sample_at((*corpus)[ec], pair.idx_current, *cfg, out)) continue;
      out.obs.goal_rel = pair.t_gt;
      return true;
    }
    return false;
  }
};

}  // namespace

PolicyNet train_policy(PolicyMode mode, PredictorNet* predictor,
                       const PolicyCorpus& corpus, const PolicyTrainConfig& tc,
                       const ObjectiveWeights& weights, const PolicyConfig& cfg) {
  PolicyNet net(cfg, splitmix64(tc.seed ^ 0x70117ull));
  finetune_policy(net, mode, predictor, corpus, tc, weights);
  return net;
}

void finetune_policy(PolicyNet& policy, PolicyMode mode, PredictorNet* predictor,
                     const PolicyCorpus& corpus, const PolicyTrainConfig& tc,
                     const ObjectiveWeights& weights) {
  weights.validate();
  if (mode == PolicyMode::kSocial && !predictor)
    throw std::invalid_argument("train_policy: social mode requires a predictor checkpoint");
  if (corpus.empty()) throw std::invalid_argument("train_policy: empty corpus");

  const PolicyConfig& cfg = policy.config();
  PairSampler sampler(corpus, cfg);
  Rng rng(splitmix64(tc.seed ^ 0x77a1ull));

  const uint64_t frozen_before = predictor ? predictor->checksum() : 0;

  tinynet::Adam opt(tc.lr);
  std::FILE* curve = nullptr;
  if (!tc.curve_path.empty()) {
    curve = std::fopen(tc.curve_path.c_str(), "w");
    if (!curve)
      throw std::runtime_error("train_policy: cannot open curve file " + tc.curve_path);
    std::fputs("epoch,loss,j_pose,j_col,j_reg,j_cp,j_ps,j_int\n", curve);
  }

  policy.net().set_mode(Mode::kTrain);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    opt.set_lr(tc.lr * std::pow(tc.lr_decay, epoch));
    LossParts epoch_parts;
    for (int step = 0; step < tc.steps_per_epoch; ++step) {
      std::vector<PolicySample> batch;
      batch.reserve(tc.batch);
      const int n_cross = static_cast<int>(tc.cross_fraction * tc.batch);
      for (int b = 0; b < tc.batch; ++b) {
        PolicySample s;
        bool ok = false;
        if (b < tc.batch - n_cross)
          ok = sampler.draw_same(rng, tc, s);
        else
          ok = sampler.draw_cross(rng, s) || sampler.draw_same(rng, tc, s);
        if (!ok) continue;
        batch.push_back(std::move(s));
      }
      if (batch.empty())
        throw std::runtime_error("train_policy: could not assemble a batch");

      Matrix obs(batch.size(), cfg.obs_dim());
      for (size_t b = 0; b < batch.size(); ++b)
        obs.row(b) = policy.encode(batch[b].obs).transpose();

      policy.net().zero_grads();
      Matrix raw = policy.forward_raw(obs);
      Matrix twists_flat = raw;
      for (long c = 0; c < twists_flat.cols(); ++c) {
        if (c % 2 == 0)
          twists_flat.col(c) = cfg.v_max * (raw.col(c).array() + 1.0) / 2.0;
        else
          twists_flat.col(c) = cfg.omega_max * raw.col(c);
      }

      Matrix d_twists;
      LossParts parts = policy_loss_batch(mode, predictor, batch, twists_flat, weights,
                                          cfg, &d_twists);
      if (!std::isfinite(parts.total))
        throw std::runtime_error("train_policy: non-finite loss at epoch " +
                                 std::to_string(epoch) + " step " + std::to_string(step));

      Matrix d_raw = d_twists;
      for (long c = 0; c < d_raw.cols(); ++c) {
        if (c % 2 == 0)
          d_raw.col(c) *= cfg.v_max / 2.0;
        else
          d_raw.col(c) *= cfg.omega_max;
      }
      policy.net().backward(d_raw);
      opt.step(policy.net());

      epoch_parts.total += parts.total;
      epoch_parts.j_pose += parts.j_pose;
      epoch_parts.j_col += parts.j_col;
      epoch_parts.j_reg += parts.j_reg;
      epoch_parts.j_cp += parts.j_cp;
      epoch_parts.j_ps += parts.j_ps;
      epoch_parts.j_int += parts.j_int;
    }
    if (curve) {
      const double k = tc.steps_per_epoch;
      std::fprintf(curve, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", epoch,
                   epoch_parts.total / k, epoch_parts.j_pose / k, epoch_parts.j_col / k,
                   epoch_parts.j_reg / k, epoch_parts.j_cp / k, epoch_parts.j_ps / k,
                   epoch_parts.j_int / k);
    }
  }
  if (curve) std::fclose(curve);
  policy.net().set_mode(Mode::kEval);

  if (predictor && predictor->checksum() != frozen_before)
    throw std::logic_error("train_policy: frozen predictor was modified");
}

}  // namespace socnav
