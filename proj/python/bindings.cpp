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

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "socnav/autonomy.hpp"
#include "socnav/commands.hpp"
#include "socnav/continual.hpp"
#include "socnav/eval.hpp"
#include "socnav/policy.hpp"
#include "socnav/predictor.hpp"
#include "socnav/se2.hpp"
#include "socnav/socialforce.hpp"

namespace py = pybind11;
using namespace socnav;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Socially compliant navigation core: SE(2) geometry, social-force "
            "simulation, pedestrian prediction, policy objectives, evaluation";

  // --- geometry ---
  py::class_<Pose2>(m, "Pose2")
      .def(py::init<>())
      .def(py::init<double, double, double>(), py::arg("x"), py::arg("y"),
           py::arg("theta"))
      .def_readwrite("x", &Pose2::x)
      .def_readwrite("y", &Pose2::y)
      .def_readwrite("theta", &Pose2::theta)
      .def("__repr__", [](const Pose2& p) {
        return "Pose2(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " +
               std::to_string(p.theta) + ")";
      });

  py::class_<Twist>(m, "Twist")
      .def(py::init<>())
      .def(py::init<double, double>(), py::arg("v"), py::arg("omega"))
      .def_readwrite("v", &Twist::v)
      .def_readwrite("omega", &Twist::omega);

  py::class_<Track>(m, "Track")
      .def(py::init<>())
      .def_readwrite("points", &Track::points)
      .def_readwrite("dt", &Track::dt)
      .def_readwrite("frame", &Track::frame);

  m.def("normalize_angle", &normalize_angle);
  m.def("compose", &compose);
  m.def("inverse", &inverse);
  m.def("relative_pose", &relative_pose);
  m.def("to_frame", &to_frame);
  m.def("integrate_unicycle", &integrate_unicycle, py::arg("start"), py::arg("twists"),
        py::arg("dt"));
  m.def("clamp_distance", &clamp_distance);
  m.def("chain_relative_pose", &chain_relative_pose);

  // --- social force ---
  py::enum_<AgentKind>(m, "AgentKind")
      .value("PEDESTRIAN", AgentKind::kPedestrian)
      .value("ROBOT", AgentKind::kRobot);

  py::class_<SocialForceParams>(m, "SocialForceParams")
      .def(py::init<>())
      .def_readwrite("tau", &SocialForceParams::tau)
      .def_readwrite("repulsion_a", &SocialForceParams::repulsion_a)
      .def_readwrite("repulsion_b", &SocialForceParams::repulsion_b)
      .def_readwrite("ped_nominal", &SocialForceParams::ped_nominal)
      .def_readwrite("robot_nominal", &SocialForceParams::robot_nominal)
      .def_readwrite("max_speed_factor", &SocialForceParams::max_speed_factor);

  py::class_<ScenarioAgent>(m, "ScenarioAgent")
      .def(py::init<>())
      .def_readwrite("id", &ScenarioAgent::id)
      .def_readwrite("kind", &ScenarioAgent::kind)
      .def_readwrite("start", &ScenarioAgent::start)
      .def_readwrite("goal", &ScenarioAgent::goal);

  py::class_<Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_readwrite("scenario_id", &Scenario::scenario_id)
      .def_readwrite("agents", &Scenario::agents)
      .def_readwrite("n_steps", &Scenario::n_steps)
      .def_readwrite("dt", &Scenario::dt)
      .def_readwrite("seed", &Scenario::seed);

  py::class_<AgentTrace>(m, "AgentTrace")
      .def_readonly("id", &AgentTrace::id)
      .def_readonly("kind", &AgentTrace::kind)
      .def_readonly("pos", &AgentTrace::pos)
      .def_readonly("vel", &AgentTrace::vel)
      .def_readonly("theta", &AgentTrace::theta);

  py::class_<Rollout>(m, "Rollout")
      .def_readonly("scenario_id", &Rollout::scenario_id)
      .def_readonly("dt", &Rollout::dt)
      .def_readonly("agents", &Rollout::agents)
      .def("length", &Rollout::length);

  m.def("generate_scenario", &generate_scenario, py::arg("seed"), py::arg("params"),
        py::arg("dt") = 0.33, py::arg("n_steps") = 80);
  m.def("rollout_scenario", &rollout_scenario);
  m.def("generate_dataset", &generate_dataset, py::arg("n"), py::arg("seed"),
        py::arg("params"), py::arg("dt") = 0.33, py::arg("n_steps") = 80);
  m.def("write_scenario_csv", &write_scenario_csv);
  m.def("read_scenario_csv", &read_scenario_csv);

  // --- predictor ---
  py::class_<PredictorConfig>(m, "PredictorConfig")
      .def(py::init<>())
      .def_readwrite("horizon", &PredictorConfig::horizon)
      .def_readwrite("dt", &PredictorConfig::dt)
      .def_readwrite("hidden", &PredictorConfig::hidden)
      .def_readwrite("zp_dim", &PredictorConfig::zp_dim)
      .def_readwrite("v_limit", &PredictorConfig::v_limit);

  py::class_<PredictorNet>(m, "PredictorNet")
      .def(py::init<const PredictorConfig&, uint64_t>(), py::arg("config"),
           py::arg("seed"))
      .def_static("load", &PredictorNet::load)
      .def("save", &PredictorNet::save)
      .def("predict_future", &PredictorNet::predict_future)
      .def("predict_giveway", &PredictorNet::predict_giveway)
      .def("checksum", &PredictorNet::checksum);

  // --- policy & objectives ---
  py::enum_<PsVariant>(m, "PsVariant")
      .value("LITERAL_MIN", PsVariant::kLiteralMin)
      .value("MEAN", PsVariant::kMean)
      .value("MAX_PENETRATION", PsVariant::kMaxPenetration);

  py::class_<ObjectiveWeights>(m, "ObjectiveWeights")
      .def(py::init<>())
      .def_readwrite("w_c", &ObjectiveWeights::w_c)
      .def_readwrite("w_r", &ObjectiveWeights::w_r)
      .def_readwrite("w_cp", &ObjectiveWeights::w_cp)
      .def_readwrite("w_ps", &ObjectiveWeights::w_ps)
      .def_readwrite("w_i", &ObjectiveWeights::w_i)
      .def_readwrite("r_h", &ObjectiveWeights::r_h)
      .def_readwrite("r_r", &ObjectiveWeights::r_r)
      .def_readwrite("ps_variant", &ObjectiveWeights::ps_variant);

  py::class_<PolicyConfig>(m, "PolicyConfig")
      .def(py::init<>())
      .def_readwrite("n_s", &PolicyConfig::n_s)
      .def_readwrite("n_p", &PolicyConfig::n_p)
      .def_readwrite("dt", &PolicyConfig::dt)
      .def_readwrite("v_max", &PolicyConfig::v_max)
      .def_readwrite("omega_max", &PolicyConfig::omega_max)
      .def_readwrite("hidden", &PolicyConfig::hidden);

  py::class_<PolicyObservation>(m, "PolicyObservation")
      .def(py::init<>())
      .def_readwrite("goal_rel", &PolicyObservation::goal_rel)
      .def_readwrite("odom_past", &PolicyObservation::odom_past)
      .def_readwrite("ped_past", &PolicyObservation::ped_past)
      .def_readwrite("ped_valid", &PolicyObservation::ped_valid)
      .def_readwrite("rays", &PolicyObservation::rays);

  py::class_<PolicyNet>(m, "PolicyNet")
      .def(py::init<const PolicyConfig&, uint64_t>(), py::arg("config"), py::arg("seed"))
      .def_static("load", &PolicyNet::load)
      .def("save", &PolicyNet::save)
      .def("forward", &PolicyNet::forward);

  m.def(
      "j_pose",
      [](const std::vector<Twist>& twists, const Pose2& goal, double dt) {
        return j_pose(twists, goal, dt).value;
      },
      py::arg("twists"), py::arg("goal_rel"), py::arg("dt"));
  m.def(
      "j_col",
      [](const std::vector<Twist>& twists, const std::vector<Eigen::Vector2d>& pts,
         double dt, double r_r) { return j_col(twists, pts, dt, r_r).value; },
      py::arg("twists"), py::arg("obstacle_points"), py::arg("dt"), py::arg("r_r"));
  m.def(
      "j_reg",
      [](const std::vector<Twist>& twists) { return j_reg(twists).value; },
      py::arg("twists"));
  m.def(
      "j_ps",
      [](const Track& h_hat, const std::vector<Twist>& twists, double dt,
         const ObjectiveWeights& w) { return j_ps(h_hat, twists, dt, w, true).value; },
      py::arg("h_hat"), py::arg("twists"), py::arg("dt"), py::arg("weights"));
  m.def(
      "j_int",
      [](const std::vector<Twist>& twists, const std::vector<Eigen::Vector2d>& h_future,
         double dt) { return j_int(twists, h_future, dt, true).value; },
      py::arg("twists"), py::arg("h_future_true"), py::arg("dt"));
  m.def("combine_social", &combine_social);
  m.def("combine_collect", &combine_collect);

  // --- autonomy ---
  py::enum_<BumperSide>(m, "BumperSide")
      .value("NONE", BumperSide::kNone)
      .value("LEFT", BumperSide::kLeft)
      .value("RIGHT", BumperSide::kRight);

  py::enum_<RecoveryPhase>(m, "RecoveryPhase")
      .value("NORMAL", RecoveryPhase::kNormal)
      .value("BACKING_UP", RecoveryPhase::kBackingUp)
      .value("ROTATING", RecoveryPhase::kRotating)
      .value("STUCK", RecoveryPhase::kStuck);

  py::class_<RecoveryState>(m, "RecoveryState")
      .def(py::init<>())
      .def_readwrite("phase", &RecoveryState::phase)
      .def_readonly("collision_times", &RecoveryState::collision_times);

  m.def(
      "rescue_maneuver",
      [](const RecoveryState& st, const Pose2& pose, BumperSide side, double t,
         double dt) { return rescue_maneuver(st, pose, side, t, dt); },
      py::arg("state"), py::arg("pose"), py::arg("side"), py::arg("t_now"),
      py::arg("dt"));

  py::class_<AnchorTag>(m, "AnchorTag")
      .def(py::init<>())
      .def_readwrite("n_ar", &AnchorTag::n_ar)
      .def_readwrite("p_ar", &AnchorTag::p_ar)
      .def_readwrite("n_node", &AnchorTag::n_node);

  py::class_<AnchorRegistry>(m, "AnchorRegistry")
      .def(py::init<>())
      .def("add", &AnchorRegistry::add)
      .def_readonly("tags", &AnchorRegistry::tags);

  py::class_<AnchorDetection>(m, "AnchorDetection")
      .def(py::init<>())
      .def_readwrite("n_ar", &AnchorDetection::n_ar)
      .def_readwrite("observed", &AnchorDetection::observed);

  m.def(
      "localize_with_anchor",
      [](int estimate, const AnchorDetection& det, const AnchorRegistry& reg) {
        return localize_with_anchor(estimate, det, reg);
      },
      py::arg("current_node_estimate"), py::arg("detection"), py::arg("registry"));

  // --- evaluation ---
  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("gr", &MetricsReport::gr)
      .def_readonly("spl", &MetricsReport::spl)
      .def_readonly("stl", &MetricsReport::stl)
      .def_readonly("cp", &MetricsReport::cp)
      .def_readonly("co", &MetricsReport::co)
      .def_readonly("psv", &MetricsReport::psv);

  py::class_<EpisodeResult>(m, "EpisodeResult")
      .def_readonly("success", &EpisodeResult::success)
      .def_readonly("stuck", &EpisodeResult::stuck)
      .def_readonly("path_len", &EpisodeResult::path_len)
      .def_readonly("time_s", &EpisodeResult::time_s)
      .def_readonly("cp", &EpisodeResult::cp)
      .def_readonly("co", &EpisodeResult::co)
      .def_readonly("psv", &EpisodeResult::psv)
      .def_readonly("mean_cp_perturbation", &EpisodeResult::mean_cp_perturbation);

  py::class_<EpisodeConfig>(m, "EpisodeConfig")
      .def(py::init<>())
      .def_readwrite("start", &EpisodeConfig::start)
      .def_readwrite("goal", &EpisodeConfig::goal)
      .def_readwrite("max_steps", &EpisodeConfig::max_steps)
      .def_readwrite("seed", &EpisodeConfig::seed);

  m.def("make_episode_suite", [](int n, uint64_t seed) { return make_episode_suite(n, seed); },
        py::arg("n"), py::arg("seed"));
  m.def(
      "run_episode",
      [](PolicyNet& policy, const EpisodeConfig& cfg, const ObjectiveWeights& w) {
        return run_episode(policy, nullptr, cfg, w);
      },
      py::arg("policy"), py::arg("config"), py::arg("weights"));
  m.def(
      "compute_metrics",
      [](const std::vector<EpisodeResult>& results,
         const std::vector<EpisodeConfig>& configs, const ObjectiveWeights& w,
         double v_max) { return compute_metrics(results, configs, w, v_max); },
      py::arg("results"), py::arg("configs"), py::arg("weights"), py::arg("v_max"));
  m.def("shortest_path_length", &shortest_path_length);

  // --- pipeline ---
  m.def("run_command", &run_command,
        "Run a CLI pipeline command (gen-data, train-predictor, train-policy, "
        "collect, eval, continual); returns the exit code");
}
