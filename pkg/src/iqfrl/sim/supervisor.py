"""Scripted right-wall-following supervisor and the geometric situation labeller.

Supervisor law (angles relative to the heading, distances in m)::

    d_r, phi = min range over [-120, -60] deg and the angle of that beam
    d_f      = min range over [-30, 30] deg
    vang = -K_D (min(d_r, 1) - d_wall) + K_A (phi + pi/2) + K_F max(0, 1 - d_f)
    vlin = v_max * clip((d_f - 0.3) / 0.7, 0, 1) * (1 - K_S |vang| / w_max)

Situations: CC when d_f < 1; CX when the -90 deg beam reads > 1 while the rear-right
sector [-150, -100] deg still sees a wall closer than 1; SW otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import CC, CX, SW
from .world import V_MAX, W_MAX, beam_angles


@dataclass(frozen=True)
class SupervisorGains:
    k_d: float = 1.5
    k_a: float = 1.0
    k_f: float = 2.0
    k_s: float = 0.7
    d_wall: float = 0.5
    front_clear: float = 1.0


class ScanGeometry:
    """Beam index sets for the sectors the supervisor and labeller read."""

    def __init__(self, n_beams: int, fov: float = 2 * math.pi):
        a = np.degrees(beam_angles(n_beams, fov))
        self.angles = np.radians(a)
        self.right = np.flatnonzero((a >= -120) & (a <= -60))
        self.front = np.flatnonzero((a >= -30) & (a <= 30))
        self.rear_right = np.flatnonzero((a >= -150) & (a <= -100))
        self.side = int(np.argmin(np.abs(a + 90)))


_GEOM: dict = {}


def geometry(n_beams: int) -> ScanGeometry:
    g = _GEOM.get(n_beams)
    if g is None:
        g = _GEOM[n_beams] = ScanGeometry(n_beams)
    return g


def supervisor_command(scan, gains: SupervisorGains = SupervisorGains()) -> tuple[float, float]:
    scan = np.asarray(scan, dtype=float)
    g = geometry(len(scan))
    k = g.right[int(np.argmin(scan[g.right]))]
    d_r, phi = float(scan[k]), float(g.angles[k])
    d_f = float(scan[g.front].min())
    vang = -gains.k_d * (min(d_r, 1.0) - gains.d_wall) + gains.k_a * (phi + math.pi / 2)
    if d_f < gains.front_clear:
        vang += gains.k_f * (gains.front_clear - d_f)
    vang = max(-W_MAX, min(W_MAX, vang))
    vlin = V_MAX * min(1.0, max(0.0, (d_f - 0.3) / 0.7)) * (1.0 - gains.k_s * abs(vang) / W_MAX)
    return vlin, vang


def situation(scan, front_clear: float = 1.0) -> int:
    scan = np.asarray(scan, dtype=float)
    g = geometry(len(scan))
    if scan[g.front].min() < front_clear:
        return CC
    if scan[g.side] > 1.0 and scan[g.rear_right].min() < 1.0:
        return CX
    return SW
