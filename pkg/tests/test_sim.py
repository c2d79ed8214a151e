import math

import numpy as np
import pytest

import oracles
from iqfrl.data import CC, CX, SW
from iqfrl.fuzzy import Label
from iqfrl.rules import Consequent, KnowledgeBase, QFRule, SectorProposition, Variables
from iqfrl.sim.bench import (FuzzyController, LapGate, LapMetrics, SimConfig, SupervisorController,
                             detect_blockade, metrics_report, quality, recovery_pose, simulate,
                             trace_to_csv)
from iqfrl.sim.datagen import MissingSituationError, supervisor_dataset
from iqfrl.sim.supervisor import situation, supervisor_command
from iqfrl.sim.world import (V_MAX, W_MAX, EmbeddedError, EnvFormatError, Environment, LaserConfig,
                             RobotState, clearance, env_from_text, env_to_text, l_corridor,
                             multi_room, raycast, rectangular_room, step)

L72 = LaserConfig(n_beams=72)
SIM72 = SimConfig(laser=L72, max_time=300)


def random_scene(rng):
    segs = rng.uniform(0, 10, (5, 4))
    env = Environment(segs)
    while True:
        x, y = rng.uniform(0, 10, 2)
        if clearance(env, x, y) > 0.05:
            return env, RobotState(x, y, rng.uniform(-math.pi, math.pi))


def test_raycast_matches_dense_oracle():
    rng = np.random.default_rng(0)
    laser = LaserConfig(n_beams=12, max_range=8.0)
    worst = 0.0
    for _ in range(100):
        env, st = random_scene(rng)
        ours = raycast(env, st, laser)
        for k, a in enumerate(laser.angles):
            ref = oracles.ray_dense(env.segments, st.x, st.y, st.theta + a, laser.max_range)
            worst = max(worst, abs(ours[k] - ref))
    assert worst <= 1e-6


def test_raycast_simple_cases():
    wall = Environment([[1.0, -5.0, 1.0, 5.0]])
    scan = raycast(wall, RobotState(0, 0, 0), LaserConfig(n_beams=4))
    # beams at -135, -45, 45, 135 degrees
    assert scan[1] == pytest.approx(math.sqrt(2)) and scan[2] == pytest.approx(math.sqrt(2))
    assert scan[0] == 8.0 and scan[3] == 8.0
    assert np.all(raycast(Environment(np.zeros((0, 4))), RobotState(0, 0, 0), L72) == 8.0)
    with pytest.raises(EmbeddedError):
        raycast(wall, RobotState(1.0, 0.0, 0.0), L72)


def test_perpendicular_wall_one_metre():
    room = rectangular_room()
    scan = raycast(room, RobotState(3.0, 1.0, 0.0), LaserConfig(n_beams=720))
    # beams 179 and 180 straddle -90 degrees by a quarter degree
    right = scan[179:181]
    assert right == pytest.approx(1.0 / math.cos(math.radians(0.25)), abs=1e-12)


@pytest.mark.parametrize("v,w", [(0.4, 0.0), (0.0, 0.5), (0.3, -0.6)])
def test_step_matches_fine_integration(v, w):
    s0 = RobotState(1.0, 2.0, 0.3)
    s1 = step(s0, v, w, 0.1)
    x, y, th = oracles.integrate_unicycle(1.0, 2.0, 0.3, v, w, 0.1)
    assert abs(s1.x - x) <= 1e-9 and abs(s1.y - y) <= 1e-9
    assert abs(s1.theta - th) <= 1e-9


def test_step_clamps_commands():
    s = step(RobotState(0, 0, 0), 3.0, -9.0, 0.1)
    assert (s.v, s.omega) == (V_MAX, -W_MAX)
    with pytest.raises(ValueError):
        step(RobotState(0, 0, 0), 0.1, 0.0, 0.0)


def test_env_text_round_trip():
    env = l_corridor()
    back = env_from_text(env_to_text(env))
    assert np.array_equal(back.segments, env.segments)
    assert (back.anchor, back.name, back.direction) == (env.anchor, env.name, env.direction)
    with pytest.raises(EnvFormatError, match="line 2"):
        env_from_text("name x\nsegment 1 2 3\n")


def test_blockade_when_stationary():
    room = rectangular_room()
    hist = [(0.1 * k, 3.0, 1.0, 0.0) for k in range(51)]
    blocked, pose = detect_blockade(hist, room)
    assert blocked
    assert clearance(room, pose.x, pose.y) == pytest.approx(0.5)


def test_no_blockade_when_moving():
    room = rectangular_room()
    hist = [(0.1 * k, 1.0 + 0.04 * k, 1.0, 0.0) for k in range(51)]
    assert detect_blockade(hist, room) == (False, None)
    # shorter than the window: never stuck
    assert not detect_blockade([(0.0, 3.0, 1.0, 0.0), (0.1, 3.0, 1.0, 0.0)], room)[0]


def test_collision_recovery_is_parallel_with_wall_on_right():
    room = rectangular_room()
    hist = [(0.0, 3.0, 3.8, math.pi / 2)]  # 0.2 m from the north wall
    blocked, pose = detect_blockade(hist, room)
    assert blocked
    assert pose.y == pytest.approx(3.5)
    assert math.cos(pose.theta) == pytest.approx(-1.0)  # heading west keeps y=4 on the right
    scan = raycast(room, pose, LaserConfig(n_beams=720))
    assert scan[179:181].min() == pytest.approx(0.5, abs=1e-4)


def test_recovery_slides_out_of_corners():
    room = rectangular_room()
    pose = recovery_pose(room, RobotState(5.85, 3.9, 0.0))
    assert clearance(room, pose.x, pose.y) >= 0.5 - 1e-9


def test_lap_gate_direction():
    gate = LapGate(rectangular_room())
    assert gate.crossed((2.9, 0.5), (3.1, 0.5))
    assert not gate.crossed((3.1, 0.5), (2.9, 0.5))
    assert not gate.crossed((2.9, 2.5), (3.1, 2.5))  # beyond the half-length


def test_quality_examples_and_monotonicity():
    assert quality(50, 50, 0) == 1.0
    assert quality(60, 50, 0) == pytest.approx(1 / 10.0)
    assert quality(50, 40, 1) == pytest.approx(1 / 3.0)
    assert quality(55, 40, 0) > quality(58, 40, 0) > quality(58, 40, 1)
    assert quality(55, 45, 0) > quality(55, 35, 0)


def test_supervisor_straight_wall():
    room = rectangular_room()
    scan = raycast(room, RobotState(3.0, 0.5, 0.0), L72)
    vlin, vang = supervisor_command(scan)
    assert abs(vang) < 0.05 and vlin > 0.45
    assert situation(scan) == SW


def test_supervisor_frontal_wall_turns_left():
    room = rectangular_room()
    scan = raycast(room, RobotState(5.4, 0.5, 0.0), L72)
    vlin, vang = supervisor_command(scan)
    assert vang > 0.3 and vlin < 0.3
    assert situation(scan) == CC


def test_convex_corner_label():
    env = Environment([[-5.0, 0.0, 0.0, 0.0]])  # wall ends just behind the robot
    scan = raycast(env, RobotState(0.3, 0.5, 0.0), L72)
    assert situation(scan) == CX


@pytest.mark.parametrize("make", [rectangular_room, l_corridor, multi_room])
def test_supervisor_completes_lap(make):
    res = simulate(make(), SupervisorController(), 1, SIM72)
    assert res.status == "complete" and res.blockades == 0
    lap = res.laps[0]
    assert 40 < lap.mean_right_dist < 70


def test_simulation_is_deterministic():
    a = simulate(rectangular_room(), SupervisorController(noise=0.2, rng=np.random.default_rng(3)), 1, SIM72)
    b = simulate(rectangular_room(), SupervisorController(noise=0.2, rng=np.random.default_rng(3)), 1, SIM72)
    assert trace_to_csv(a.trace) == trace_to_csv(b.trace)


def test_straight_ahead_kb_hits_wall_and_recovers():
    v = Variables(n_beams=72)
    always = QFRule((SectorProposition(Label(v.distance, 1, 1), Label(v.beam, 1, 1), 10.0),), None,
                    Consequent(9, 10))  # full speed, no turn
    ctl = FuzzyController({SW: KnowledgeBase((always,), v, ())})
    res = simulate(rectangular_room(), ctl, 1, SimConfig(laser=L72, max_time=30))
    assert res.status == "incomplete"
    assert res.blockades >= 1
    assert ctl.uncovered == 0


def test_uncovered_input_holds_previous_command():
    v = Variables(n_beams=72)
    near = QFRule((SectorProposition(Label(v.distance, 5, 1), Label(v.beam, 1, 1), 100.0),), None,
                  Consequent(5, 10))
    ctl = FuzzyController({SW: KnowledgeBase((near,), v, ())})
    assert ctl(np.full(72, 8.0), 0.0) == (SW, 0.0, 0.0)
    assert ctl.uncovered == 1
    sit, vlin, vang = ctl(np.zeros(72), 0.0)
    assert vlin == pytest.approx(0.25)
    assert ctl(np.full(72, 8.0), 0.0)[1:] == (vlin, vang)


def test_metrics_report_aggregates():
    laps = [LapMetrics(50.0, 40.0, 1.0, 30.0, 0), LapMetrics(54.0, 44.0, 3.0, 32.0, 2)]
    rep = metrics_report(laps)
    assert rep["aggregate"]["mean_right_dist"] == {"mean": 52.0, "std": 2.0}
    assert rep["quality"] == pytest.approx(quality(52.0, 42.0, 1.0))
    assert rep["laps"][0]["quality"] == pytest.approx(quality(50, 40, 0))


def test_datagen_exact_counts_and_labels():
    per, cls = supervisor_dataset(rectangular_room(), {SW: 7, CX: 0, CC: 5},
                                  np.random.default_rng(0), SIM72)
    assert (len(per[SW]), len(per[CX]), len(per[CC])) == (7, 0, 5)
    assert sorted(cls.classes.tolist()) == [SW] * 7 + [CC] * 5
    for s in (SW, CC):
        assert all(situation(d) == s for d in per[s].distances)
        for d, y in zip(per[s].distances, per[s].outputs):
            assert tuple(y) == supervisor_command(d)


def test_datagen_missing_situation():
    with pytest.raises(MissingSituationError):
        supervisor_dataset(rectangular_room(), {SW: 1, CX: 1, CC: 0}, np.random.default_rng(0), SIM72)


def test_zero_command_keeps_pose():
    s = RobotState(1.5, -2.0, 2.9, 0.3, 0.2)
    s1 = step(s, 0.0, 0.0, 0.1)
    assert (s1.x, s1.y, s1.theta) == (s.x, s.y, s.theta)


def test_report_quality_consistent_with_its_columns():
    res = simulate(rectangular_room(), SupervisorController(), 2, SIM72)
    rep = res.report()
    assert len(rep["laps"]) == 2
    for lap in rep["laps"]:
        assert lap["quality"] == quality(lap["mean_right_dist"], lap["mean_vel"], lap["blockades"])
    agg = rep["aggregate"]
    assert rep["quality"] == quality(agg["mean_right_dist"]["mean"], agg["mean_vel"]["mean"],
                                     agg["blockades"]["mean"])
