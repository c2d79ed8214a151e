"""Training data from the scripted supervisor: site rollout, then perturbed-pose sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import CC, CX, SW, Dataset
from ..rules import Variables
from .bench import SimConfig, SupervisorController, simulate
from .supervisor import SupervisorGains, situation, supervisor_command
from .world import Environment, RobotState, clearance, raycast

SITUATION_ORDER = (SW, CX, CC)


class MissingSituationError(ValueError):
    """The environment never produces a requested situation."""


@dataclass(frozen=True)
class SamplingConfig:
    pos_sigma: float = 0.25
    heading_sigma: float = 0.5
    velocity_range: tuple = (0.0, 0.5)
    min_clearance: float = 0.3
    rollout_laps: int = 1
    rollout_noise: float = 0.2
    max_tries_per_example: int = 200


def collect_sites(env: Environment, sim: SimConfig, samp: SamplingConfig, gains: SupervisorGains, rng):
    """Poses per situation along a noisy supervisor lap."""
    sites: dict = {s: [] for s in SITUATION_ORDER}
    ctrl = SupervisorController(gains, samp.rollout_noise, rng)

    def record(t, state, scan, sit):
        sites[int(sit)].append(state)

    simulate(env, ctrl, samp.rollout_laps, sim, rng, on_cycle=record)
    return sites


def supervisor_dataset(env: Environment, counts: dict, rng=None, sim: SimConfig = SimConfig(),
                       samp: SamplingConfig = SamplingConfig(),
                       gains: SupervisorGains = SupervisorGains()):
    """Per-situation regression datasets and the joint 3-class dataset.

    ``counts`` maps situation id to the number of examples wanted.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    variables = Variables(n_beams=sim.laser.n_beams)
    sites = collect_sites(env, sim, samp, gains, rng)
    for s in SITUATION_ORDER:
        if counts.get(s, 0) > 0 and not sites[s]:
            raise MissingSituationError(f"environment {env.name!r} has no situation {s}")
    per: dict = {}
    for s in SITUATION_ORDER:
        n = int(counts.get(s, 0))
        scans, vels, outs = [], [], []
        tries = 0
        while len(scans) < n:
            tries += 1
            if tries > samp.max_tries_per_example * max(n, 1):
                raise MissingSituationError(f"could not sample situation {s} in {env.name!r}")
            base = sites[s][rng.integers(len(sites[s]))]
            x = base.x + rng.normal(0.0, samp.pos_sigma)
            y = base.y + rng.normal(0.0, samp.pos_sigma)
            th = base.theta + rng.normal(0.0, samp.heading_sigma)
            if clearance(env, x, y) < samp.min_clearance:
                continue
            scan = raycast(env, RobotState(x, y, th), sim.laser)
            if situation(scan, gains.front_clear) != s:
                continue
            # the supervisor ignores speed; spread it so any measured speed is covered
            v = float(rng.uniform(*samp.velocity_range))
            scans.append(scan)
            vels.append(v)
            outs.append(supervisor_command(scan, gains))
        per[s] = Dataset(np.array(scans).reshape(-1, variables.n_beams), np.array(vels),
                         outputs=np.array(outs).reshape(-1, 2), variables=variables)
    class_ds = Dataset(
        np.concatenate([per[s].distances for s in SITUATION_ORDER]),
        np.concatenate([per[s].velocity for s in SITUATION_ORDER]),
        classes=np.concatenate([np.full(len(per[s]), s) for s in SITUATION_ORDER]),
        variables=variables, n_classes=3, default_class=SW)
    return per, class_ds
