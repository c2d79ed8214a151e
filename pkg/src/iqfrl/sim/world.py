"""Segment worlds, the 2-D range scanner and unicycle kinematics.

Beam ``k`` of an ``n``-beam scan points at ``-pi + (k + 0.5) * fov / n`` relative to
the heading (fov = 2 pi: beam 0 at the rear, beams counter-clockwise, the right side
around ``n / 4``). Reversing the scan mirrors it about the heading axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

V_MAX = 0.5
W_MAX = math.pi / 4


class EmbeddedError(RuntimeError):
    """Pose lies on a wall segment."""


class EnvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Environment:
    segments: np.ndarray  # (m, 4): x1, y1, x2, y2
    anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)
    direction: int = 1
    name: str = "env"
    gate_half_length: float = 1.0

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        if not np.isfinite(seg).all():
            raise EnvFormatError("non-finite segment coordinates")
        seg.setflags(write=False)
        object.__setattr__(self, "segments", seg)
        if self.direction not in (1, -1):
            raise EnvFormatError("direction must be +1 or -1")


@dataclass(frozen=True)
class LaserConfig:
    n_beams: int = 722
    fov: float = 2 * math.pi
    max_range: float = 8.0

    @property
    def angles(self) -> np.ndarray:
        return beam_angles(self.n_beams, self.fov)


def beam_angles(n_beams: int, fov: float = 2 * math.pi) -> np.ndarray:
    return -math.pi + (np.arange(n_beams) + 0.5) * fov / n_beams


def sector_indices(n_beams: int, lo_deg: float, hi_deg: float, fov: float = 2 * math.pi):
    a = np.degrees(beam_angles(n_beams, fov))
    return np.flatnonzero((a >= lo_deg) & (a <= hi_deg))


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float
    v: float = 0.0
    omega: float = 0.0


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + math.pi, 2 * math.pi) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    w = np.where((a > -math.pi) & (a <= math.pi), a, w)  # in-range angles pass untouched
    return float(w) if np.ndim(w) == 0 else w


# ---------------------------------------------------------------- geometry

def point_segment_distance(env: Environment, x: float, y: float):
    """Distance to every segment and the nearest points, shapes (m,) and (m, 2)."""
    s = env.segments
    a, b = s[:, :2], s[:, 2:]
    e = b - a
    ee = (e * e).sum(axis=1)
    p = np.array([x, y])
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(ee > 0, ((p - a) * e).sum(axis=1) / ee, 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * e
    return np.hypot(*(p - q).T), q


def clearance(env: Environment, x: float, y: float) -> float:
    if len(env.segments) == 0:
        return math.inf
    return float(point_segment_distance(env, x, y)[0].min())


def raycast(env: Environment, state: RobotState, laser: LaserConfig = LaserConfig()) -> np.ndarray:
    """Range to the nearest segment along every beam, clamped to ``max_range``."""
    if len(env.segments) == 0:
        return np.full(laser.n_beams, laser.max_range)
    if clearance(env, state.x, state.y) < 1e-9:
        raise EmbeddedError("robot embedded in wall")
    ang = state.theta + laser.angles
    ux, uy = np.cos(ang)[:, None], np.sin(ang)[:, None]
    s = env.segments
    ex, ey = (s[:, 2] - s[:, 0])[None, :], (s[:, 3] - s[:, 1])[None, :]
    wx, wy = (s[:, 0] - state.x)[None, :], (s[:, 1] - state.y)[None, :]
    den = ux * ey - uy * ex
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (wx * ey - wy * ex) / den
        u = (wx * uy - wy * ux) / den
    ok = (np.abs(den) > 1e-15) & (t >= 0) & (u >= 0) & (u <= 1)
    d = np.where(ok, t, np.inf).min(axis=1)
    return np.minimum(d, laser.max_range)


def step(state: RobotState, vlin: float, vang: float, dt: float = 0.1) -> RobotState:
    """Exact-arc unicycle update; commands are clamped to the robot limits."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = min(V_MAX, max(-V_MAX, float(vlin)))
    w = min(W_MAX, max(-W_MAX, float(vang)))
    th = state.theta
    if abs(w) < 1e-12:
        x = state.x + v * dt * math.cos(th)
        y = state.y + v * dt * math.sin(th)
    else:
        th1 = th + w * dt
        x = state.x + v / w * (math.sin(th1) - math.sin(th))
        y = state.y - v / w * (math.cos(th1) - math.cos(th))
    return RobotState(x, y, wrap_angle(th + w * dt), v, w)


# ---------------------------------------------------------------- environment files

def env_to_text(env: Environment) -> str:
    lines = ["# iqfrl-env units=m", f"name {env.name}",
             "anchor {!r} {!r} {!r}".format(*env.anchor), f"direction {env.direction}",
             f"gate {env.gate_half_length!r}"]
    lines += ["segment {!r} {!r} {!r} {!r}".format(*map(float, s)) for s in env.segments]
    return "\n".join(lines) + "\n"


def env_from_text(text: str) -> Environment:
    kw: dict = {}
    segs = []
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *vals = line.split()
        try:
            if key == "segment" and len(vals) == 4:
                segs.append([float(v) for v in vals])
            elif key == "anchor" and len(vals) == 3:
                kw["anchor"] = tuple(float(v) for v in vals)
            elif key == "direction" and len(vals) == 1:
                kw["direction"] = int(vals[0])
            elif key == "gate" and len(vals) == 1:
                kw["gate_half_length"] = float(vals[0])
            elif key == "name" and len(vals) == 1:
                kw["name"] = vals[0]
            else:
                raise EnvFormatError(f"line {k}: unexpected {key!r} with {len(vals)} fields")
        except ValueError as e:
            if isinstance(e, EnvFormatError):
                raise
            raise EnvFormatError(f"line {k}: bad number in {line!r}") from None
    if len(segs) < 3:
        raise EnvFormatError("an environment needs at least 3 segments")
    if "anchor" not in kw:
        raise EnvFormatError("missing anchor line")
    return Environment(np.array(segs), **kw)


def load_env(path) -> Environment:
    with open(path) as fh:
        return env_from_text(fh.read())


def save_env(env: Environment, path) -> None:
    with open(path, "w") as fh:
        fh.write(env_to_text(env))


# ---------------------------------------------------------------- fixtures

def polygon(points, closed: bool = True) -> list[list[float]]:
    pts = list(points) + ([points[0]] if closed else [])
    return [[*pts[i], *pts[i + 1]] for i in range(len(pts) - 1)]


def rectangular_room(width: float = 6.0, height: float = 4.0) -> Environment:
    segs = polygon([(0, 0), (width, 0), (width, height), (0, height)])
    return Environment(np.array(segs, dtype=float), (width / 2, 0.5, 0.0), 1, "room")


def l_corridor() -> Environment:
    """L-shaped room with a door gap on the west wall opening into a small bay."""
    segs = polygon([(0, 0), (8, 0), (8, 3), (3, 3), (3, 8), (0, 8), (0, 5.5)], closed=False)
    segs += polygon([(0, 5.5), (-2, 5.5), (-2, 3.5), (0, 3.5), (0, 0)], closed=False)
    return Environment(np.array(segs, dtype=float), (4.0, 0.5, 0.0), 1, "lcorridor")


def multi_room() -> Environment:
    """Two rooms joined by a doorway at the end of a thin partition wall."""
    segs = polygon([(0, 0), (10, 0), (10, 6), (0, 6)])
    segs += polygon([(4.95, 0), (5.05, 0), (5.05, 4.0), (4.95, 4.0)], closed=False)
    segs += [[4.95, 4.0, 4.95, 0.0]]
    return Environment(np.array(segs, dtype=float), (2.5, 0.5, 0.0), 1, "multiroom")


FIXTURES = {"room": rectangular_room, "lcorridor": l_corridor, "multiroom": multi_room}
