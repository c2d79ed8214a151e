"""Post-hoc rule subset selection: fitness-ranked prefix candidates refined by iterated local search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .rules import KnowledgeBase

SCORE_TOL = 1e-12


def prefix_candidates(kb: KnowledgeBase) -> list[np.ndarray]:
    """Masks selecting the top-i rules by stored fitness, i = 1..#rules."""
    n = len(kb.rules)
    fit = np.asarray(kb.fitness if kb.fitness else [0.0] * n, dtype=float)
    order = sorted(range(n), key=lambda k: -fit[k])  # stable
    out = []
    mask = np.zeros(n, dtype=bool)
    for k in order:
        mask = mask.copy()
        mask[k] = True
        out.append(mask)
    return out


class MaskScorer:
    """Scores rule masks against a dataset from one precomputed DOF matrix."""

    def __init__(self, kb: KnowledgeBase, dataset: Dataset, penalty: float | None = None):
        v = kb.variables
        self.dofs = kb.dof_matrix(dataset.distances, dataset.velocity)
        self.centers = kb.output_centers()
        self.ranges = np.array([v.vlin.width, v.vang.width])
        self.y = dataset.outputs
        n_outputs = self.y.shape[1] if self.y is not None else 2
        # 4 x the largest possible single-example error
        self.penalty = 4.0 * n_outputs if penalty is None else penalty
        self._cache: dict = {}

    def __call__(self, mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        key = mask.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        n = self.dofs.shape[1]
        if n == 0:
            return 0.0
        d = self.dofs[mask]
        tot = d.sum(axis=0)
        covered = tot > 0
        err = np.full(n, self.penalty)
        if covered.any():
            pred = (self.centers[mask].T @ d[:, covered]) / tot[covered]
            err[covered] = (((self.y[covered] - pred.T) / self.ranges) ** 2).sum(axis=1)
        score = float(err.mean())
        self._cache[key] = score
        return score


def score_mask(kb: KnowledgeBase, mask, dataset: Dataset, penalty: float | None = None) -> float:
    """Mean normalized squared output error; uncovered examples cost ``penalty``."""
    return MaskScorer(kb, dataset, penalty)(mask)


@dataclass(frozen=True)
class _Scored:
    mask: np.ndarray
    score: float

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def beats(self, other: _Scored) -> bool:
        if self.score < other.score - SCORE_TOL:
            return True
        return abs(self.score - other.score) <= SCORE_TOL and self.size < other.size


def _neighbours(mask: np.ndarray, radius: int):
    n = len(mask)
    for r in range(1, radius + 1):
        for bits in itertools.combinations(range(n), r):
            m = mask.copy()
            m[list(bits)] ^= True
            if m.any():
                yield m


def _local_search(start: _Scored, scorer: MaskScorer, radius: int) -> _Scored:
    cur = start
    while True:
        best = cur
        for m in _neighbours(cur.mask, radius):
            cand = _Scored(m, scorer(m))
            if cand.beats(best):
                best = cand
        if best is cur:
            return cur
        cur = best


def ils_select(kb: KnowledgeBase, dataset: Dataset, radius_nbhood: int = 1,
               max_restarts: int = 2, rng=None, penalty: float | None = None) -> KnowledgeBase:
    """Best rule subset found by iterated local search from the best prefix candidate."""
    if len(kb.rules) <= 1:
        return kb
    rng = np.random.default_rng(0) if rng is None else rng
    scorer = MaskScorer(kb, dataset, penalty)
    best = None
    for m in prefix_candidates(kb):
        cand = _Scored(m, scorer(m))
        if best is None or cand.beats(best):
            best = cand
    best = _local_search(best, scorer, radius_nbhood)
    n = len(kb.rules)
    for _ in range(max_restarts):
        m = best.mask.copy()
        flips = rng.choice(n, size=min(n, radius_nbhood + 1), replace=False)
        m[flips] ^= True
        if not m.any():
            m[flips[0]] = True
        cand = _local_search(_Scored(m, scorer(m)), scorer, radius_nbhood)
        if cand.beats(best):
            best = cand
    return kb.subset(best.mask)
