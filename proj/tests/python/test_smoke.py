# Copyright 2026 The socnav Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import pytest

import socnav


def test_pose_algebra():
    p = socnav.Pose2(1.0, 2.0, 0.7)
    ident = socnav.compose(p, socnav.inverse(p))
    assert abs(ident.x) < 1e-12
    assert abs(ident.y) < 1e-12
    assert abs(ident.theta) < 1e-12

    a = socnav.Pose2(1.0, 0.0, math.pi / 2)
    b = socnav.Pose2(1.0, 0.0, 0.0)
    c = socnav.compose(a, b)
    assert c.x == pytest.approx(1.0)
    assert c.y == pytest.approx(1.0)


def test_unicycle_and_clamp():
    poses = socnav.integrate_unicycle(
        socnav.Pose2(0, 0, 0), [socnav.Twist(0.5, 0.0)] * 8, 0.33
    )
    assert poses[-1].x == pytest.approx(1.32)
    assert socnav.clamp_distance(0.9, 0.7) == 0.7
    assert socnav.clamp_distance(-0.1, 0.7) == 0.0


def test_social_force_dataset():
    params = socnav.SocialForceParams()
    rollouts = socnav.generate_dataset(2, 7, params)
    assert len(rollouts) == 2
    assert rollouts[0].length() == 80
    sc = socnav.generate_scenario(5, params)
    robot = sc.agents[0]
    assert math.hypot(robot.start.x, robot.start.y) == pytest.approx(2.0)
    ped = sc.agents[1]
    assert math.hypot(ped.start.x, ped.start.y) == pytest.approx(5.3)


def test_predictor_giveway_is_zero_conditioning():
    cfg = socnav.PredictorConfig()
    cfg.hidden = 32
    cfg.zp_dim = 8
    net = socnav.PredictorNet(cfg, 3)
    track = socnav.Track()
    track.dt = 0.33
    track.points = [(0.1 * i, 0.05 * i) for i in range(8)]
    zeros = socnav.Track()
    zeros.dt = 0.33
    zeros.points = [(0.0, 0.0)] * 8
    a = net.predict_giveway(track, track)
    b = net.predict_future(track, track, zeros)
    for pa, pb in zip(a.points, b.points):
        assert pa[0] == pb[0] and pa[1] == pb[1]


def test_objective_arithmetic():
    w = socnav.ObjectiveWeights()
    assert socnav.combine_social(1.0, 2.0, 3.0, w) == 321.0
    twists = [socnav.Twist(0.4, 0.0)] * 8
    assert socnav.j_reg(twists) == 0.0
    h_hat = socnav.Track()
    h_hat.dt = 0.33
    h_hat.points = [(0.5 if i % 2 == 0 else 0.6, 0.0) for i in range(8)]
    zeros = [socnav.Twist(0.0, 0.0)] * 8
    assert socnav.j_ps(h_hat, zeros, 0.33, w) == pytest.approx(0.1)


def test_rescue_geometry():
    st = socnav.RecoveryState()
    plan, nxt = socnav.rescue_maneuver(
        st, socnav.Pose2(0, 0, 0), socnav.BumperSide.LEFT, 0.0, 0.33
    )
    poses = socnav.integrate_unicycle(socnav.Pose2(0, 0, 0), plan, 0.33)
    assert poses[-1].x == pytest.approx(-0.5)
    assert poses[-1].theta == pytest.approx(-math.pi / 4)


def test_pipeline_command(tmp_path):
    out = tmp_path / "tiny.csv"
    code = socnav.run_command(
        ["gen-data", "--scenarios", "2", "--seed", "3", "--out", str(out)]
    )
    assert code == 0
    assert out.exists()
    rollouts = socnav.read_scenario_csv(str(out))
    assert len(rollouts) == 2
