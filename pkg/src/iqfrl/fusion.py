"""Tracking plus wall-following avoidance with hysteresis switching.

Angle convention: ``dev`` and ``dtheta`` are counter-clockwise positive, so a
positive ``dev`` means the objective bears to the robot's left.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .sim.bench import SimConfig
from .sim.world import (V_MAX, W_MAX, Environment, LaserConfig, RobotState, beam_angles,
                        clearance, polygon, raycast, step, wrap_angle)

TRACKING, AVOIDANCE = "tracking", "avoidance"


@dataclass(frozen=True)
class TrackingInputs:
    d: float
    dev: float
    dv: float
    dtheta: float


@dataclass(frozen=True)
class FusionConfig:
    trigger_dist: float = 0.4
    safe_dist: float = 0.5
    d_ref: float = 0.5  # 0 selects path tracking on raw distance
    k_dev: float = 1.5
    v_max: float = V_MAX

    def __post_init__(self):
        if not self.trigger_dist < self.safe_dist:
            raise ValueError("trigger_dist must be below safe_dist")
        if self.d_ref < 0:
            raise ValueError("d_ref must be non-negative")


@dataclass(frozen=True)
class Target:
    x: float
    y: float
    theta: float = 0.0
    v: float = 0.0


def tracking_inputs(robot: RobotState, target: Target, cfg: FusionConfig = FusionConfig()) -> TrackingInputs:
    dist = math.hypot(robot.x - target.x, robot.y - target.y)
    d = dist / cfg.d_ref if cfg.d_ref > 0 else dist
    dev = wrap_angle(math.atan2(target.y - robot.y, target.x - robot.x) - robot.theta)
    dv = (robot.v - target.v) / cfg.v_max
    return TrackingInputs(d, dev, dv, wrap_angle(target.theta - robot.theta))


def simple_tracker(inp: TrackingInputs, cfg: FusionConfig = FusionConfig()) -> tuple[float, float]:
    vang = min(W_MAX, max(-W_MAX, cfg.k_dev * inp.dev))
    vlin = cfg.v_max * min(1.0, inp.d) * max(0.0, math.cos(inp.dev))
    return min(V_MAX, max(0.0, vlin)), vang


def mirror_scan(scan) -> np.ndarray:
    """Left/right swap of a scan laid out symmetrically about the heading."""
    return np.asarray(scan)[::-1]


def obstacle_side(scan, fov: float = 2 * math.pi) -> str:
    a = beam_angles(len(scan), fov)
    return "left" if a[int(np.argmin(scan))] > 0 else "right"


@dataclass(frozen=True)
class Decision:
    behavior: str
    side: Optional[str]
    vlin: float
    vang: float


def avoidance_command(scan, velocity: float, side: str, controller: Callable) -> tuple[float, float]:
    """Right-wall controller; left obstacles go through the mirrored scan and negated turn."""
    if side == "left":
        _, vlin, vang = controller(mirror_scan(scan), velocity)
        return vlin, -vang
    _, vlin, vang = controller(np.asarray(scan), velocity)
    return vlin, vang


def arbitrate(scan, state: RobotState, target: Target, avoid: Callable,
              cfg: FusionConfig = FusionConfig(), previous: Optional[Decision] = None) -> Decision:
    """Avoidance starts below ``trigger_dist`` and lasts until ``safe_dist`` is reached."""
    dmin = float(np.min(scan))
    avoiding = previous is not None and previous.behavior == AVOIDANCE
    if avoiding and dmin >= cfg.safe_dist:
        avoiding = False
    elif not avoiding and dmin < cfg.trigger_dist:
        avoiding = True
    if avoiding:
        side = previous.side if previous is not None and previous.behavior == AVOIDANCE \
            else obstacle_side(scan)
        vlin, vang = avoidance_command(scan, state.v, side, avoid)
        return Decision(AVOIDANCE, side, vlin, vang)
    vlin, vang = simple_tracker(tracking_inputs(state, target, cfg), cfg)
    return Decision(TRACKING, None, vlin, vang)


# ---------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class PathFollower:
    """Constant-speed walk along a polyline; stops at the last waypoint."""

    waypoints: np.ndarray
    speed: float
    size: float = 0.3

    def __post_init__(self):
        w = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if len(w) == 0:
            raise ValueError("a path needs at least one waypoint")
        object.__setattr__(self, "waypoints", w)

    def at(self, t: float) -> Target:
        w = self.waypoints
        if len(w) == 1:
            return Target(w[0, 0], w[0, 1], 0.0, 0.0)
        seg = np.diff(w, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        s = self.speed * t
        for k, length in enumerate(lengths):
            if s <= length or k == len(lengths) - 1:
                f = min(1.0, s / length) if length > 0 else 1.0
                p = w[k] + f * seg[k]
                moving = f < 1.0
                return Target(p[0], p[1], math.atan2(seg[k, 1], seg[k, 0]),
                              self.speed if moving else 0.0)
            s -= length
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class Scenario:
    target: PathFollower
    obstacles: tuple = ()
    start: tuple = (0.0, 0.0, 0.0)
    d_ref: float = 0.5
    max_time: float = 120.0


def scenario_from_json(text: str) -> Scenario:
    raw = json.loads(text)
    try:
        t = raw["target"]
        target = PathFollower(t["waypoints"], float(t.get("speed", 0.0)))
        obstacles = tuple(PathFollower(o["waypoints"], float(o.get("speed", 0.0)), float(o.get("size", 0.3)))
                          for o in raw.get("obstacles", []))
        return Scenario(target, obstacles, tuple(float(v) for v in raw["start"]),
                        float(raw.get("d_ref", 0.5)), float(raw.get("max_time", 120.0)))
    except (KeyError, TypeError) as e:
        raise ValueError(f"bad scenario: {e}") from None


def scenario_to_json(sc: Scenario) -> str:
    def path(p: PathFollower, with_size: bool) -> dict:
        d = {"waypoints": p.waypoints.tolist(), "speed": p.speed}
        if with_size:
            d["size"] = p.size
        return d
    return json.dumps({"target": path(sc.target, False),
                       "obstacles": [path(o, True) for o in sc.obstacles],
                       "start": list(sc.start), "d_ref": sc.d_ref, "max_time": sc.max_time}, indent=2)


def _with_obstacles(env: Environment, scenario: Scenario, t: float) -> Environment:
    if not scenario.obstacles:
        return env
    segs = [env.segments]
    for ob in scenario.obstacles:
        p = ob.at(t)
        h = 0.5 * ob.size
        segs.append(np.array(polygon([(p.x - h, p.y - h), (p.x + h, p.y - h),
                                      (p.x + h, p.y + h), (p.x - h, p.y + h)])))
    return Environment(np.vstack(segs), env.anchor, env.direction, env.name, env.gate_half_length)


@dataclass
class FusionResult:
    trace: list = field(default_factory=list)
    collisions: int = 0
    switches: int = 0
    final_distance: float = math.nan
    min_clearance: float = math.inf


FUSION_TRACE_FIELDS = ("t", "x", "y", "theta", "behavior", "vlin_cmd", "vang_cmd", "target_x", "target_y")


def run_scenario(env: Environment, scenario: Scenario, avoid: Callable,
                 cfg: Optional[FusionConfig] = None, sim: SimConfig = SimConfig()) -> FusionResult:
    cfg = cfg or FusionConfig(d_ref=scenario.d_ref)
    laser: LaserConfig = sim.laser
    state = RobotState(*scenario.start)
    out = FusionResult()
    prev: Optional[Decision] = None
    t = 0.0
    while t < scenario.max_time - 1e-9:
        world = _with_obstacles(env, scenario, t)
        target = scenario.target.at(t)
        scan = raycast(world, state, laser)
        dec = arbitrate(scan, state, target, avoid, cfg, prev)
        if prev is not None and prev.behavior != dec.behavior:
            out.switches += 1
        prev = dec
        new = step(state, dec.vlin, dec.vang, sim.dt)
        t = round(t + sim.dt, 10)
        c = clearance(_with_obstacles(env, scenario, t), new.x, new.y)
        out.min_clearance = min(out.min_clearance, c)
        if c <= sim.robot_radius:
            # contact: the move is refused
            out.collisions += 1
            new = RobotState(state.x, state.y, state.theta, 0.0, 0.0)
        state = new
        out.trace.append((t, state.x, state.y, state.theta, dec.behavior, dec.vlin, dec.vang,
                          target.x, target.y))
    final = scenario.target.at(t)
    out.final_distance = math.hypot(state.x - final.x, state.y - final.y)
    return out
