"""Multi-granularity triangular partitions, label similarity and quantified propositions.

Labels are uniform triangular partitions of a universe. ``A(g, j)`` is the j-th
(1-based) of ``g`` labels; granularity 1 is the whole universe with membership 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

log = logging.getLogger(__name__)

SIMILARITY_POINTS = 101
MASK_EPS = 0.01


class EmptySectorError(ValueError):
    """A beam label that covers no beam of the scan."""


class UncoveredInputError(RuntimeError):
    """No rule of the knowledge base fires for the input."""


@dataclass(frozen=True)
class Universe:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"universe {self.name!r}: min must be < max")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def clamp(self, x):
        return np.clip(x, self.lo, self.hi)


def _label_geometry(lo, hi, g, j):
    """Center, half-width and clipped support of label j of g (arrays welcome)."""
    g = np.asarray(g, dtype=float)
    j = np.asarray(j, dtype=float)
    full = g <= 1
    step = np.where(full, hi - lo, (hi - lo) / np.where(full, 1.0, g - 1.0))
    center = np.where(full, 0.5 * (lo + hi), lo + (j - 1.0) * step)
    s_lo = np.where(full, lo, np.maximum(lo, center - step))
    s_hi = np.where(full, hi, np.minimum(hi, center + step))
    return center, step, s_lo, s_hi, full


def _label_mu(x, center, hw, full):
    mu = np.maximum(0.0, 1.0 - np.abs(x - center) / hw)
    return np.where(full, 1.0, mu)


@dataclass(frozen=True)
class Label:
    universe: Universe
    granularity: int
    index: int

    def __post_init__(self):
        if self.granularity < 1 or not 1 <= self.index <= self.granularity:
            raise ValueError(f"invalid label A({self.granularity},{self.index})")

    def __hash__(self):
        return self._hash

    @cached_property
    def _hash(self):
        return hash((self.universe, self.granularity, self.index))

    @cached_property
    def _geom(self):
        # scalar twin of _label_geometry; same operation order, same floats
        lo, hi = float(self.universe.lo), float(self.universe.hi)
        g, j = float(self.granularity), float(self.index)
        if g <= 1:
            return 0.5 * (lo + hi), hi - lo, lo, hi
        step = (hi - lo) / (g - 1.0)
        c = lo + (j - 1.0) * step
        return c, step, max(lo, c - step), min(hi, c + step)

    @property
    def center(self) -> float:
        return self._geom[0]

    @property
    def half_width(self) -> float:
        return self._geom[1]

    @property
    def support(self) -> tuple[float, float]:
        return self._geom[2], self._geom[3]

    @property
    def support_width(self) -> float:
        return self._geom[3] - self._geom[2]

    def membership(self, x):
        x = self.universe.clamp(np.asarray(x, dtype=float))
        if self.granularity == 1:
            return np.ones_like(x)
        c, hw = self._geom[0], self._geom[1]
        return np.maximum(0.0, 1.0 - np.abs(x - c) / hw)

    def __str__(self):
        return f"A_{self.universe.name}^{{{self.granularity},{self.index}}}"


@dataclass(frozen=True)
class TriangularMask:
    """Triangle with membership 0.5 at ``left`` and ``right`` and 1 at ``center``."""

    universe: Universe
    left: float
    center: float
    right: float

    def __post_init__(self):
        if not self.left <= self.center <= self.right:
            raise ValueError("mask requires left <= center <= right")

    @property
    def support(self) -> tuple[float, float]:
        lo = self.center - 2.0 * (self.center - self.left)
        hi = self.center + 2.0 * (self.right - self.center)
        return max(self.universe.lo, lo), min(self.universe.hi, hi)

    @property
    def support_width(self) -> float:
        lo, hi = self.support
        return hi - lo

    def widened(self, eps: float = MASK_EPS) -> TriangularMask:
        """Symmetric replacement for masks narrower than ``eps`` of the universe."""
        min_width = eps * self.universe.width
        if self.support_width >= min_width:
            return self
        h = 0.25 * min_width  # support spans twice the left..right distance
        return TriangularMask(self.universe, self.center - h, self.center, self.center + h)

    def membership(self, x):
        x = self.universe.clamp(np.asarray(x, dtype=float))
        c = self.center
        left_base = 2.0 * (c - self.left)
        right_base = 2.0 * (self.right - c)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu_l = np.where(left_base > 0, 1.0 - (c - x) / left_base, 0.0)
            mu_r = np.where(right_base > 0, 1.0 - (x - c) / right_base, 0.0)
        mu = np.where(x < c, mu_l, np.where(x > c, mu_r, 1.0))
        return np.maximum(0.0, mu)


def labels_at(universe: Universe, granularity: int) -> list[Label]:
    return [Label(universe, granularity, j) for j in range(1, granularity + 1)]


def _union_grid(a_lo, a_hi, b_lo, b_hi, n):
    """Points spread uniformly (by length) over the union of two intervals.

    All arguments broadcast; the result has a trailing axis of length ``n``.
    """
    a_first = a_lo <= b_lo
    f_lo = np.where(a_first, a_lo, b_lo)
    f_hi = np.where(a_first, a_hi, b_hi)
    s_lo = np.where(a_first, b_lo, a_lo)
    s_hi = np.where(a_first, b_hi, a_hi)
    gap = np.maximum(0.0, s_lo - f_hi)
    total = np.maximum(f_hi, s_hi) - f_lo - gap
    t = np.linspace(0.0, 1.0, n) * total[..., None]
    x = f_lo[..., None] + t + gap[..., None] * (t > (f_hi - f_lo)[..., None])
    return x, total


def _similarity_to_labels(mu_ref, ref_support, universe, g, j, n):
    """Similarity of one membership function against a batch of labels (g, j arrays)."""
    c, hw, lo, hi, full = _label_geometry(universe.lo, universe.hi, g, j)
    r_lo = np.full_like(lo, ref_support[0])
    r_hi = np.full_like(hi, ref_support[1])
    x, total = _union_grid(r_lo, r_hi, lo, hi, n)
    mu_a = mu_ref(x)
    mu_b = _label_mu(x, c[:, None], hw[:, None], full[:, None])
    sim = 1.0 - np.abs(mu_a - mu_b).sum(axis=1) / n
    return np.where(total > 0, sim, 0.0)


def _similarity_to_label(a, b: Label, n: int) -> float:
    sim = _similarity_to_labels(a.membership, a.support, b.universe,
                                np.array([b.granularity]), np.array([b.index]), n)
    val = float(sim[0])
    if val == 0.0 and a.support[1] - a.support[0] == 0 and b.support_width == 0:
        log.warning("similarity on degenerate supports")
    return val


@lru_cache(maxsize=262144)
def _label_similarity(a: Label, b: Label, n: int) -> float:
    return _similarity_to_label(a, b, n)


def similarity(a, b, n: int = SIMILARITY_POINTS) -> float:
    """1 - mean |mu_a - mu_b| over ``n`` points spread across the union of supports.

    Returns 0 (and logs) when the joint support is empty.
    """
    if isinstance(b, Label) and not isinstance(a, Label):
        a, b = b, a
    if isinstance(a, Label) and isinstance(b, Label):
        return _label_similarity(a, b, n)
    if isinstance(b, Label):
        return _similarity_to_label(a, b, n)
    a_lo, a_hi = a.support
    b_lo, b_hi = b.support
    x, total = _union_grid(np.array(a_lo), np.array(a_hi), np.array(b_lo), np.array(b_hi), n)
    if total <= 0:
        log.warning("similarity on degenerate supports")
        return 0.0
    return float(1.0 - np.abs(a.membership(x) - b.membership(x)).sum() / n)


def overlaps(a: Label, b: Label) -> bool:
    """True when some point has positive membership in both labels."""
    if a.granularity == 1 or b.granularity == 1:
        return True
    (a_lo, a_hi), (b_lo, b_hi) = a.support, b.support
    return max(a_lo, b_lo) < min(a_hi, b_hi)


FIT_RTOL = 1e-12  # exact fits must survive float noise in the mask width
MERGE_MU_TOL = 1e-9


def _fits(label_width: float, support: float) -> bool:
    return label_width <= support * (1.0 + FIT_RTOL)


def scan_bound(universe: Universe, support: float) -> int:
    """First granularity (>= 2) at which every label is no wider than ``support``."""
    w = universe.width
    g = max(2, math.ceil(1.0 + 2.0 * w / support))
    # settle on the float test used by _fitting_candidates
    while g > 2 and _fits(2.0 * (w / (g - 2)), support):
        g -= 1
    while not _fits(2.0 * (w / (g - 1)), support):
        g += 1
    return g


def _fitting_candidates(universe: Universe, support: float):
    """(g, j) arrays of labels with support <= ``support``, up to the scan bound, in scan order."""
    w = universe.width
    g_stop = scan_bound(universe, support)
    gs, js = [], []
    for g in range(1, g_stop + 1):
        if g == 1:
            if _fits(w, support):
                gs.append(1)
                js.append(1)
            continue
        step = w / (g - 1)
        if not _fits(step, support):
            continue  # even the clipped edge labels are too wide
        if _fits(2.0 * step, support):
            gs.extend([g] * g)
            js.extend(range(1, g + 1))
        else:
            gs.extend([g, g])
            js.extend([1, g])
    return np.array(gs, dtype=int), np.array(js, dtype=int)


def mask_to_label(mask: TriangularMask, eps: float = MASK_EPS,
                  n: int = SIMILARITY_POINTS) -> Label:
    """Most similar label whose support is no wider than the mask's.

    Granularities are scanned from 1 up to the first one whose labels all fit inside
    the mask; ties keep the earliest label in (granularity, index) order.
    """
    mask = mask.widened(eps)
    return _mask_to_label_cached(mask, n)


@lru_cache(maxsize=65536)
def _mask_to_label_cached(mask: TriangularMask, n: int) -> Label:
    u = mask.universe
    g, j = _fitting_candidates(u, mask.support_width)
    sims = _similarity_to_labels(mask.membership, mask.support, u, g, j, n)
    k = int(np.argmax(sims))
    return Label(u, int(g[k]), int(j[k]))


@lru_cache(maxsize=65536)
def most_similar_at(ref: Label, granularity: int, n: int = SIMILARITY_POINTS) -> Label:
    """Label of the given granularity most similar to ``ref`` (first on ties)."""
    u = ref.universe
    js = np.arange(1, granularity + 1)
    sims = _similarity_to_labels(ref.membership, ref.support, u,
                                 np.full_like(js, granularity), js, n)
    return Label(u, granularity, int(np.argmax(sims)) + 1)


def merge_labels(a: Label, b: Label) -> Label:
    """Finest label, no finer than the coarser input, with positive membership at both centers.

    Ties within a granularity prefer the larger min membership, then the lower index.
    Granularity 1 always qualifies.
    """
    u = a.universe
    ca, cb = a.center, b.center
    for g in range(min(a.granularity, b.granularity), 0, -1):
        best, best_mu = None, MERGE_MU_TOL  # support edges are not positive
        for lab in labels_at(u, g):
            mu = min(float(lab.membership(ca)), float(lab.membership(cb)))
            if mu > best_mu:
                best, best_mu = lab, mu
        if best is not None:
            return best
    raise AssertionError("granularity 1 always matches")


def argmax_label(universe: Universe, granularity: int, x: float) -> Label:
    """Label with the largest membership for ``x`` (lowest index on ties)."""
    js = np.arange(1, granularity + 1)
    c, hw, _, _, full = _label_geometry(universe.lo, universe.hi, granularity, js)
    mu = _label_mu(universe.clamp(float(x)), c, hw, full)
    return Label(universe, granularity, int(np.argmax(mu)) + 1)


@lru_cache(maxsize=65536)
def beam_weights(f_b: Label, n_beams: int) -> np.ndarray:
    w = f_b.membership(np.arange(n_beams, dtype=float))
    w.setflags(write=False)
    return w


def sector_is_empty(f_b: Label, n_beams: int) -> bool:
    return not beam_weights(f_b, n_beams).sum() > 0


def proportion(scan, f_d: Label, f_b: Label):
    """Share of the sector's beam mass whose distance satisfies ``f_d``.

    ``scan`` is one distance vector or a (n_examples, n_beams) matrix.
    """
    scan = np.asarray(scan, dtype=float)
    n_beams = scan.shape[-1]
    w = beam_weights(f_b, n_beams)
    idx = np.flatnonzero(w)
    total = w[idx].sum()
    if not total > 0:
        raise EmptySectorError(f"{f_b} covers no beam of a {n_beams}-beam scan")
    mu_d = f_d.membership(scan[..., idx])
    return np.minimum(mu_d, w[idx]).sum(axis=-1) / total


def quantifier_degree(p, q_percent: float):
    """'At least q percent' ramp: min(1, 100 p / q)."""
    return np.minimum(1.0, 100.0 * np.asarray(p, dtype=float) / q_percent)


def infer_weighted(dofs, centers):
    """Weighted-average defuzzification; ``centers`` has one row per rule."""
    dofs = np.asarray(dofs, dtype=float)
    total = dofs.sum(axis=0)
    if np.any(total <= 0):
        raise UncoveredInputError("no rule fires")
    return (np.asarray(centers, dtype=float).T @ dofs) / total
