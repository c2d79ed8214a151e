"""Wall-following benchmark: control loop, blockades, laps, indicators and quality."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from ..classify import classify
from ..data import SW
from ..fuzzy import UncoveredInputError
from ..rules import KnowledgeBase, infer
from .supervisor import SupervisorGains, geometry, situation, supervisor_command
from .world import (Environment, LaserConfig, RobotState, clearance, point_segment_distance,
                    raycast, step)

log = logging.getLogger(__name__)

D_WALL_CM = 50.0
V_MAX_CMS = 50.0


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    robot_radius: float = 0.25
    stuck_window: float = 5.0
    stuck_eps: float = 0.02
    recovery_offset: float = 0.5
    laser: LaserConfig = LaserConfig()
    range_noise: float = 0.0
    min_lap_distance: float = 3.0
    max_time: float = 1800.0


@dataclass(frozen=True)
class LapMetrics:
    mean_right_dist: float
    mean_vel: float
    mean_vel_change: float
    time: float
    blockades: int

    @property
    def quality(self) -> float:
        return quality(self.mean_right_dist, self.mean_vel, self.blockades)


def quality(dist_cm: float, vel_cms: float, blockades: float,
            d_wall: float = D_WALL_CM, v_max: float = V_MAX_CMS) -> float:
    return 1.0 / (1.0 + (1.0 + blockades) * (0.9 * abs(dist_cm - d_wall) + 0.1 * abs(vel_cms - v_max)))


# ---------------------------------------------------------------- blockades

def recovery_pose(env: Environment, state: RobotState, offset: float = 0.5) -> RobotState:
    """Pose ``offset`` off the nearest wall point, parallel to it with the wall on the right."""
    d, q = point_segment_distance(env, state.x, state.y)
    k = int(np.argmin(d))
    qx, qy = q[k]
    nx, ny = state.x - qx, state.y - qy
    norm = math.hypot(nx, ny)
    if norm < 1e-12:
        x1, y1, x2, y2 = env.segments[k]
        nx, ny = -(y2 - y1), x2 - x1
        norm = math.hypot(nx, ny)
    nx, ny = nx / norm, ny / norm
    theta = math.atan2(-nx, ny)
    hx, hy = math.cos(theta), math.sin(theta)
    # corners: slide along the wall until the pose is clear of other walls
    for shift in np.concatenate([[0.0], np.arange(0.1, 2.01, 0.1)]):
        for sgn in (1.0, -1.0):
            x = qx + offset * nx + sgn * shift * hx
            y = qy + offset * ny + sgn * shift * hy
            if clearance(env, x, y) >= offset - 1e-9:
                return RobotState(x, y, theta, 0.0, 0.0)
    return RobotState(qx + offset * nx, qy + offset * ny, theta, 0.0, 0.0)


def detect_blockade(history, env: Environment, cfg: SimConfig = SimConfig()):
    """``history`` is a sequence of (t, x, y, theta) ending at the current pose.

    Returns (blocked, recovery pose or None).
    """
    t, x, y, th = history[-1]
    state = RobotState(x, y, th)
    if clearance(env, x, y) <= cfg.robot_radius:
        return True, recovery_pose(env, state, cfg.recovery_offset)
    t0 = t - cfg.stuck_window
    if history[0][0] <= t0 + 1e-9:
        for ts, xs, ys, _ in reversed(history):
            if ts <= t0 + 1e-9:
                if math.hypot(x - xs, y - ys) < cfg.stuck_eps:
                    return True, recovery_pose(env, state, cfg.recovery_offset)
                break
    return False, None


class LapGate:
    """Line through the anchor, across the lap direction, of limited half-length."""

    def __init__(self, env: Environment):
        ax, ay, ath = env.anchor
        self.a = np.array([ax, ay])
        self.h = env.direction * np.array([math.cos(ath), math.sin(ath)])
        self.g = np.array([-self.h[1], self.h[0]])
        self.half = env.gate_half_length

    def crossed(self, p0, p1) -> bool:
        s0 = float(np.dot(np.asarray(p0) - self.a, self.h))
        s1 = float(np.dot(np.asarray(p1) - self.a, self.h))
        if not (s0 < 0.0 <= s1):
            return False
        f = s0 / (s0 - s1)
        pc = np.asarray(p0) + f * (np.asarray(p1) - np.asarray(p0))
        return abs(float(np.dot(pc - self.a, self.g))) <= self.half


# ---------------------------------------------------------------- controllers

class SupervisorController:
    def __init__(self, gains: SupervisorGains = SupervisorGains(), noise: float = 0.0, rng=None):
        self.gains, self.noise = gains, noise
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def __call__(self, scan, velocity):
        vlin, vang = supervisor_command(scan, self.gains)
        if self.noise:
            vlin += self.rng.uniform(-self.noise, self.noise) * 0.5
            vang += self.rng.uniform(-self.noise, self.noise)
        return situation(scan), vlin, vang


class FuzzyController:
    """Per cycle: classify the situation, infer with that situation's KB.

    Uncovered inputs hold the previous command.
    """

    def __init__(self, kbs: dict, classifier: Optional[KnowledgeBase] = None,
                 default_situation: int = SW):
        self.kbs = {k: v for k, v in kbs.items() if v is not None}
        self.classifier = classifier
        self.default = default_situation
        self.prev = (0.0, 0.0)
        self.uncovered = 0

    def __call__(self, scan, velocity):
        sit = classify(self.classifier, scan, velocity) if self.classifier is not None else self.default
        kb = self.kbs.get(sit) or self.kbs.get(self.default) or next(iter(self.kbs.values()))
        try:
            self.prev = infer(kb, scan, velocity)
        except UncoveredInputError:
            self.uncovered += 1
            log.debug("uncovered input, holding previous command")
        return sit, self.prev[0], self.prev[1]


# ---------------------------------------------------------------- run loop

TRACE_FIELDS = ("t", "x", "y", "theta", "v", "omega", "situation", "vlin_cmd", "vang_cmd")


@dataclass
class RunResult:
    laps: list
    status: str
    trace: list = field(default_factory=list)
    blockades: int = 0
    uncovered: int = 0

    def report(self) -> dict:
        return metrics_report(self.laps, self.status)


def simulate(env: Environment, controller: Callable, n_laps: int = 1,
             cfg: SimConfig = SimConfig(), rng=None, start: Optional[RobotState] = None,
             on_cycle: Optional[Callable] = None) -> RunResult:
    rng = rng if rng is not None else np.random.default_rng(0)
    laser = cfg.laser
    right = geometry(laser.n_beams).right
    state = start or RobotState(*env.anchor)
    gate = LapGate(env)
    t, v_meas, prev_v = 0.0, 0.0, None
    history = [(t, state.x, state.y, state.theta)]
    window = int(round(cfg.stuck_window / cfg.dt)) + 2
    laps, trace = [], []
    acc = {"dist": [], "vel": [], "dv": [], "t0": 0.0, "blk": 0, "travel": 0.0}
    total_blk = 0
    while len(laps) < n_laps and t < cfg.max_time - 1e-9:
        true_scan = raycast(env, state, laser)
        scan = true_scan
        if cfg.range_noise:
            scan = np.clip(true_scan + rng.uniform(-cfg.range_noise, cfg.range_noise, len(scan)),
                           0.0, laser.max_range)
        sit, vlin, vang = controller(scan, v_meas)
        if on_cycle is not None:
            on_cycle(t, state, scan, sit)
        new = step(state, vlin, vang, cfg.dt)
        t = round(t + cfg.dt, 10)
        moved = math.hypot(new.x - state.x, new.y - state.y)
        v_meas = moved / cfg.dt
        acc["dist"].append(100.0 * float(true_scan[right].min()))
        acc["vel"].append(100.0 * v_meas)
        if prev_v is not None:
            acc["dv"].append(100.0 * abs(v_meas - prev_v))
        prev_v = v_meas
        acc["travel"] += moved
        trace.append((t, new.x, new.y, new.theta, new.v, new.omega, int(sit), float(vlin), float(vang)))
        history.append((t, new.x, new.y, new.theta))
        if len(history) > window:
            del history[0]
        blocked, pose = detect_blockade(history, env, cfg)
        if blocked:
            acc["blk"] += 1
            total_blk += 1
            log.info("blockade at t=%.1f (%.2f, %.2f)", t, new.x, new.y)
            state = pose
            history = [(t, state.x, state.y, state.theta)]
            v_meas, prev_v = 0.0, None
            continue
        if gate.crossed((state.x, state.y), (new.x, new.y)) and acc["travel"] >= cfg.min_lap_distance:
            laps.append(_close_lap(acc, t))
            acc = {"dist": [], "vel": [], "dv": [], "t0": t, "blk": 0, "travel": 0.0}
        state = new
    status = "complete" if len(laps) >= n_laps else "incomplete"
    uncovered = getattr(controller, "uncovered", 0)
    return RunResult(laps, status, trace, total_blk, uncovered)


def _close_lap(acc: dict, t: float) -> LapMetrics:
    dv = acc["dv"] or [0.0]
    return LapMetrics(float(np.mean(acc["dist"])), float(np.mean(acc["vel"])),
                      float(np.mean(dv)), round(t - acc["t0"], 10), int(acc["blk"]))


def run_wall_following(env: Environment, kbs: dict, classifier_kb: Optional[KnowledgeBase],
                       n_laps: int = 1, cfg: SimConfig = SimConfig(), rng=None) -> RunResult:
    controller = FuzzyController(kbs, classifier_kb)
    return simulate(env, controller, n_laps, cfg, rng)


# ---------------------------------------------------------------- reports

METRIC_FIELDS = ("mean_right_dist", "mean_vel", "mean_vel_change", "time", "blockades")


def metrics_report(laps, status: str = "complete") -> dict:
    rows = [asdict(lap) | {"quality": lap.quality} for lap in laps]
    agg = {}
    for f in METRIC_FIELDS:
        vals = np.array([getattr(lap, f) for lap in laps], dtype=float)
        agg[f] = {"mean": float(vals.mean()) if len(vals) else float("nan"),
                  "std": float(vals.std()) if len(vals) else float("nan")}
    q = (quality(agg["mean_right_dist"]["mean"], agg["mean_vel"]["mean"],
                 agg["blockades"]["mean"]) if laps else float("nan"))
    return {"status": status, "laps": rows, "aggregate": agg, "quality": q}


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for row in trace:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()
