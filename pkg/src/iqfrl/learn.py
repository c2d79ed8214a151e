"""Iterative rule learning of quantified fuzzy rules (regression outputs).

One epoch evolves a population seeded from uncovered examples and emits its best
rule; the examples that rule covers accurately leave the uncovered set.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .data import Dataset, TrainingExample
from .fuzzy import (Label, TriangularMask, _label_mu, argmax_label, beam_weights,
                    mask_to_label, merge_labels,
                    most_similar_at, overlaps, proportion, sector_is_empty,
                    similarity)
from .rules import (Q_MAX, Q_MIN, ClassConsequent, Consequent, KnowledgeBase, QFRule,
                    SectorProposition, Variables, VelocityProposition)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnerConfig:
    ME: float = 0.02
    DOF_min: float = 0.001
    alpha_f: float = 0.99
    P_cross: float = 0.8
    pop_max: int = 70
    it_min: int = 50
    it_check: int = 10
    it_max: int = 100
    sigma_bd: float = 0.01
    sigma_v: float = 0.1
    P_min: float = 0.17
    rng_seed: int = 0
    # offspring pairs bred per iteration; 0 means pop_max // 2
    pairs_per_iteration: int = 0
    max_granularity: int = 300
    q_step: float = 1.0
    mask_eps: float = 0.01
    use_velocity: bool = True

    def __post_init__(self):
        if self.ME <= 0:
            raise ValueError("ME must be positive")
        if self.pop_max < 1 or self.it_max < 1:
            raise ValueError("pop_max and it_max must be positive")

    @property
    def pairs(self) -> int:
        return self.pairs_per_iteration or max(1, self.pop_max // 2)

    @property
    def velocity_granularity(self) -> int:
        # adjacent labels sigma_v apart (as a fraction of the universe width)
        return int(round(1.0 + 1.0 / self.sigma_v))


@dataclass(frozen=True)
class Individual:
    rule: QFRule
    fitness: float = 0.0
    confidence: float = 0.0
    support: float = 0.0
    covered: tuple = ()


@dataclass
class EpochState:
    uncovered: np.ndarray
    kb: KnowledgeBase
    population: list = field(default_factory=list)
    it: int = 0
    equal_ind: int = 0


# ---------------------------------------------------------------- error and match

def consequent_centers(c: Consequent, variables: Variables) -> np.ndarray:
    return np.array(_centers(c, variables))


@lru_cache(maxsize=65536)
def _centers(c: Consequent, variables: Variables) -> tuple[float, float]:
    return variables.output_center("vlin", c.vlin), variables.output_center("vang", c.vang)


def _ranges(variables: Variables) -> np.ndarray:
    return np.array([variables.vlin.width, variables.vang.width])


def consequent_error(c: Consequent, e: TrainingExample, variables: Variables = Variables()) -> float:
    y = np.array([e.vlin, e.vang])
    return float((((y - consequent_centers(c, variables)) / _ranges(variables)) ** 2).sum())


def match_probability(c: Consequent, e: TrainingExample, ME: float,
                      variables: Variables = Variables()) -> float:
    return math.exp(-consequent_error(c, e, variables) / ME)


def p_close(a: Consequent, b: Consequent, variables: Variables = Variables()) -> float:
    diff = (consequent_centers(a, variables) - consequent_centers(b, variables)) / _ranges(variables)
    return float(1.0 - (diff ** 2).sum() / 2)


def consequent_mutation_weights(alpha: int, beta: int) -> tuple[np.ndarray, np.ndarray]:
    """Candidate indices between alpha and beta and their normalized probabilities."""
    lo, hi = min(alpha, beta), max(alpha, beta)
    gammas = np.arange(lo, hi + 1)
    w = 1.0 - np.abs(alpha - gammas) / (abs(alpha - beta) + 1.0)
    return gammas, w / w.sum()


# ---------------------------------------------------------------- segmentation

def segment_scan(distances, universe, sigma_bd: float) -> list[tuple[int, int]]:
    """Greedy left-to-right runs of beams whose normalized distance std stays <= sigma_bd.

    Returns inclusive (first, last) beam pairs covering the whole scan.
    """
    x = (universe.clamp(np.asarray(distances, dtype=float)) - universe.lo) / universe.width
    groups, start, n = [], 0, len(x)
    while start < n:
        end = start
        while end + 1 < n and np.std(x[start:end + 2]) <= sigma_bd:
            end += 1
        groups.append((start, end))
        start = end + 1
    return groups


def _nonempty_sector(f_b: Label, n_beams: int) -> Label:
    while sector_is_empty(f_b, n_beams):
        f_b = most_similar_at(f_b, f_b.granularity - 1)
    return f_b


def _clip_q(q: float) -> float:
    return float(min(Q_MAX, max(Q_MIN, q)))


# ---------------------------------------------------------------- problem context

class Problem:
    """Dataset, config and memoized degree/match vectors over all examples."""

    kind = "regression"

    def __init__(self, data: Dataset, cfg: LearnerConfig):
        self.data, self.cfg = data, cfg
        self.variables = data.variables
        self.scan = data.variables.distance.clamp(data.distances)
        self._dof_cache: dict = {}
        self._match_cache: dict = {}
        self._unit: dict = {}
        self._all = np.arange(len(data))

    # degrees of fulfillment -------------------------------------------------
    def prop_dof(self, prop) -> np.ndarray:
        hit = self._dof_cache.get(prop)
        if hit is None:
            if len(self._dof_cache) > 200_000:
                self._dof_cache.clear()
            if isinstance(prop, VelocityProposition):
                hit = prop.f_v.membership(self.data.velocity)
            else:
                hit = prop.degree(self.scan)
            hit = np.asarray(hit, dtype=float)
            hit.setflags(write=False)
            self._dof_cache[prop] = hit
        return hit

    def rule_dof(self, rule: QFRule) -> np.ndarray:
        out = None
        for p in rule.propositions:
            d = self.prop_dof(p)
            out = d if out is None else np.minimum(out, d)
        return out

    # consequent match ---------------------------------------------------------
    def match(self, c) -> np.ndarray:
        """P(C_j | e) for every example."""
        hit = self._match_cache.get(c)
        if hit is None:
            y = self.data.outputs
            err = (((y - consequent_centers(c, self.variables)) / _ranges(self.variables)) ** 2).sum(axis=1)
            hit = np.exp(-err / self.cfg.ME)
            hit.setflags(write=False)
            self._match_cache[c] = hit
        return hit

    def accurate(self, rule: QFRule, idx: np.ndarray) -> np.ndarray:
        """Mask over ``idx``: P > P_min and DOF > DOF_min."""
        return (self.match(rule.consequent)[idx] > self.cfg.P_min) & \
               (self.rule_dof(rule)[idx] > self.cfg.DOF_min)

    # fitness ----------------------------------------------------------------
    def evaluate(self, rule: QFRule, uncovered: np.ndarray) -> Individual:
        dof = self.rule_dof(rule)[uncovered]
        ok = self.accurate(rule, uncovered)
        rho = float(dof[ok].sum())
        total = float(dof.sum())
        conf = rho / total if total > 0 else 0.0
        sup = rho / len(uncovered) if len(uncovered) else 0.0
        conf, sup = min(1.0, conf), min(1.0, sup)
        fit = self.cfg.alpha_f * conf + (1.0 - self.cfg.alpha_f) * sup
        return Individual(rule, fit, conf, sup, tuple(int(i) for i in uncovered[ok]))

    # initialization ---------------------------------------------------------
    def init_consequent(self, i: int):
        v = self.variables
        y = self.data.outputs[i]
        return Consequent(argmax_label(v.vlin, v.vlin_granularity, y[0]).index,
                          argmax_label(v.vang, v.vang_granularity, y[1]).index)

    def init_rule(self, i: int) -> QFRule:
        v, cfg = self.variables, self.cfg
        scan = self.scan[i]
        sectors = []
        for lo, hi in segment_scan(scan, v.distance, cfg.sigma_bd):
            mask_b = TriangularMask(v.beam, float(lo), 0.5 * (lo + hi), float(hi))
            f_b = _nonempty_sector(mask_to_label(mask_b, cfg.mask_eps), v.n_beams)
            group = scan[lo:hi + 1]
            d_bar, s_d = float(group.mean()), float(group.std())
            mask_d = TriangularMask(v.distance, d_bar - s_d, d_bar, d_bar + s_d)
            f_d = mask_to_label(mask_d, cfg.mask_eps)
            q = _clip_q(100.0 * float(proportion(scan, f_d, f_b)))
            sectors.append(SectorProposition(f_d, f_b, q))
        vel = None
        if cfg.use_velocity:
            vel = VelocityProposition(argmax_label(v.velocity, cfg.velocity_granularity,
                                                   self.data.velocity[i]))
        return QFRule(tuple(sectors), vel, self.init_consequent(i))

    # mutation hooks -----------------------------------------------------------
    def generalize_weights(self, ind: Individual, cand: np.ndarray, population) -> np.ndarray:
        return self.match(ind.rule.consequent)[cand]

    def specialize_weights(self, ind: Individual, cand: np.ndarray) -> np.ndarray:
        return 1.0 - self.match(ind.rule.consequent)[cand]

    def specialize_pool(self, rule: QFRule, uncovered: np.ndarray) -> np.ndarray:
        return uncovered[self.rule_dof(rule)[uncovered] > self.cfg.DOF_min]

    def mutate_consequent(self, rule: QFRule, e_idx: int, rng) -> object:
        v = self.variables
        y = self.data.outputs[e_idx]
        c = rule.consequent
        out = []
        for alpha, which, g in ((c.vlin, v.vlin, v.vlin_granularity),
                                (c.vang, v.vang, v.vang_granularity)):
            beta = argmax_label(which, g, y[0] if which is v.vlin else y[1]).index
            gammas, p = consequent_mutation_weights(alpha, beta)
            out.append(int(rng.choice(gammas, p=p)))
        return Consequent(*out)

    def _unit_center(self, c) -> tuple:
        hit = self._unit.get(c)
        if hit is None:
            r = _ranges(self.variables)
            hit = self._unit[c] = tuple(consequent_centers(c, self.variables) / r)
        return hit

    def closeness(self, c, others) -> np.ndarray:
        """P_close of ``c`` against each consequent in ``others``."""
        ca = np.array(self._unit_center(c))
        ob = np.array([self._unit_center(o) for o in others])
        return 1.0 - ((ob - ca) ** 2).sum(axis=1) / len(ca)


# ---------------------------------------------------------------- selection

def _pick(rng, weights: np.ndarray) -> int:
    w = np.asarray(weights, dtype=float)
    tot = w.sum()
    if not tot > 0 or not np.isfinite(tot):
        return int(rng.integers(len(w)))
    return int(rng.choice(len(w), p=w / tot))


def tournament(population, rng) -> int:
    i, j = rng.integers(len(population), size=2)
    fi, fj = population[i].fitness, population[j].fitness
    return int(i if fi > fj or (fi == fj and i <= j) else j)


def mate_weights(population, first: int, problem: Problem) -> np.ndarray:
    """P_close of every individual relative to ``first`` (self weight 0)."""
    w = problem.closeness(population[first].rule.consequent,
                          [ind.rule.consequent for ind in population])
    w = np.clip(w, 0.0, None)
    w[first] = 0.0
    return w


def mate_pairs(population, problem: Problem, rng, n_pairs: int = 1) -> list[tuple[int, int]]:
    pairs = []
    for _ in range(n_pairs):
        a = tournament(population, rng)
        if len(population) < 2:
            pairs.append((a, a))
            continue
        w = mate_weights(population, a, problem)
        if not w.sum() > 0:
            w = np.ones(len(population))
            w[a] = 0.0
        pairs.append((a, _pick(rng, w)))
    return pairs


# ---------------------------------------------------------------- crossover

def _select_antecedents(a: QFRule, b: QFRule, beam, rng):
    g_max = max(s.f_b.granularity for s in a.sectors + b.sectors)
    has_vel = a.velocity is not None or b.velocity is not None
    while True:
        m = int(rng.integers(1, g_max + 2))
        if m <= g_max:
            ref = Label(beam, g_max, m)
            ka = int(np.argmax([similarity(s.f_b, ref) for s in a.sectors]))
            kb = int(np.argmax([similarity(s.f_b, ref) for s in b.sectors]))
            return ("sector", ka, kb)
        if has_vel:
            return ("velocity", None, None)


def _combine_sector(sa: SectorProposition, sb: SectorProposition, n_beams: int):
    """Merged proposition, or None when the first one should be deleted."""
    if not overlaps(sa.f_b, sb.f_b) or not overlaps(sa.f_d, sb.f_d):
        return None
    if sa.f_b == sb.f_b and sa.f_d == sb.f_d:
        return None
    f_b = _nonempty_sector(merge_labels(sa.f_b, sb.f_b), n_beams)
    return SectorProposition(merge_labels(sa.f_d, sb.f_d), f_b, min(sa.q, sb.q))


def crossover_rules(a: QFRule, b: QFRule, variables: Variables, rng) -> QFRule:
    """Offspring of ``a`` obtained by changing one antecedent with information from ``b``."""
    kind, ka, kb = _select_antecedents(a, b, variables.beam, rng)
    if kind == "velocity":
        va, vb = a.velocity, b.velocity
        if va is None:
            return replace(a, velocity=vb)
        if vb is None or not overlaps(va.f_v, vb.f_v) or va == vb:
            return replace(a, velocity=None)
        return replace(a, velocity=VelocityProposition(merge_labels(va.f_v, vb.f_v)))
    merged = _combine_sector(a.sectors[ka], b.sectors[kb], variables.n_beams)
    sectors = list(a.sectors)
    if merged is None:
        if len(sectors) == 1:
            return a  # the grammar needs one sector
        del sectors[ka]
    else:
        sectors[ka] = merged
    return replace(a, sectors=tuple(sectors))


def crossover(a: Individual, b: Individual, variables: Variables, rng) -> tuple[QFRule, QFRule]:
    return (crossover_rules(a.rule, b.rule, variables, rng),
            crossover_rules(b.rule, a.rule, variables, rng))


# ---------------------------------------------------------------- mutation moves

class _Chain(tuple):
    """Label chain with a hash computed once (chains key several caches)."""

    def __new__(cls, labels):
        self = super().__new__(cls, labels)
        self._h = tuple.__hash__(self)
        return self

    def __hash__(self):
        return self._h


@lru_cache(maxsize=65536)
def coarser_chain(lab: Label) -> tuple[Label, ...]:
    """``lab`` then the most similar label one granularity lower, down to granularity 1."""
    out = [lab]
    while lab.granularity > 1:
        lab = most_similar_at(lab, lab.granularity - 1)
        out.append(lab)
    return _Chain(out)


@lru_cache(maxsize=65536)
def finer_chain(lab: Label, g_cap: int, n_beams: int = 0) -> tuple[Label, ...]:
    """``lab`` then successively finer most-similar labels up to ``g_cap``.

    With ``n_beams`` the chain stops before the first label covering no beam.
    """
    out = [lab]
    while lab.granularity < g_cap:
        lab = most_similar_at(lab, lab.granularity + 1)
        if n_beams and sector_is_empty(lab, n_beams):
            break
        out.append(lab)
    return _Chain(out)


@lru_cache(maxsize=65536)
def q_chain(q: float, step: float) -> np.ndarray:
    out = [q]
    while True:
        nq = _clip_q(out[-1] + step)
        if nq == out[-1]:
            arr = np.array(out)
            arr.setflags(write=False)
            return arr
        out.append(nq)


@lru_cache(maxsize=65536)
def _chain_geometry(chain: tuple) -> tuple:
    c = np.array([lab.center for lab in chain])[:, None]
    hw = np.array([lab.half_width for lab in chain])[:, None]
    full = np.array([lab.granularity == 1 for lab in chain])[:, None]
    return c, hw, full


def _chain_membership(chain, x) -> np.ndarray:
    """(len(chain), len(x)) memberships; same arithmetic as Label.membership."""
    u = chain[0].universe
    x = u.clamp(np.asarray(x, dtype=float))[None, :]
    return _label_mu(x, *_chain_geometry(chain if isinstance(chain, _Chain) else _Chain(chain)))


@lru_cache(maxsize=65536)
def _chain_beam_weights(chain: tuple, n_beams: int) -> tuple:
    """Beam weights of the chain labels that cover at least one beam."""
    wb = _chain_membership(chain, np.arange(n_beams, dtype=float))
    tot = wb.sum(axis=1)
    keep = tot > 0
    wb, tot = wb[keep], tot[keep]
    wb.setflags(write=False)
    tot.setflags(write=False)
    return _Chain(lab for lab, k in zip(chain, keep) if k), wb, tot


def _first_or_extreme(mus: np.ndarray, done: np.ndarray, general: bool) -> int:
    """Index of the first state meeting the goal, else of the most extreme one."""
    hit = np.flatnonzero(done)
    if len(hit):
        return int(hit[0])
    return int(np.argmax(mus) if general else np.argmin(mus))


class _Moves:
    """Generalization and specialization moves evaluated on a single example.

    Each move walks its whole chain (coarser/finer labels, lower/higher q) and stops
    at the first state meeting the goal; without one it keeps the most extreme state.
    """

    def __init__(self, problem: Problem, e_idx: int):
        self.p = problem
        self.scan = problem.scan[e_idx]
        self.vel = float(problem.data.velocity[e_idx])
        self.n_beams = problem.variables.n_beams

    def mu(self, prop) -> float:
        if isinstance(prop, VelocityProposition):
            return float(prop.f_v.membership(self.vel))
        return float(prop.degree(self.scan))

    def _goal(self, mus, general: bool, strict: bool):
        dmin = self.p.cfg.DOF_min
        if general:
            return mus > dmin if strict else mus >= dmin
        return mus < dmin

    def _sector_moves(self, s: SectorProposition, general: bool):
        cfg = self.p.cfg
        if general:
            d_chain, b_chain = coarser_chain(s.f_d), coarser_chain(s.f_b)
            qs = q_chain(s.q, -cfg.q_step)
        else:
            d_chain = finer_chain(s.f_d, cfg.max_granularity)
            b_chain = finer_chain(s.f_b, cfg.max_granularity, self.n_beams)
            qs = q_chain(s.q, cfg.q_step)
        out = []
        # F_d chain over the fixed sector
        w = beam_weights(s.f_b, self.n_beams)
        idx = np.flatnonzero(w)
        md = _chain_membership(d_chain, self.scan[idx])
        p = np.minimum(md, w[idx]).sum(axis=1) / w[idx].sum()
        out.append((d_chain, np.minimum(1.0, 100.0 * p / s.q), "f_d"))
        # F_b chain with the fixed distance label
        b_chain, wb, tot = _chain_beam_weights(b_chain, self.n_beams)
        mu_d = s.f_d.membership(self.scan)
        p = np.minimum(mu_d[None, :], wb).sum(axis=1) / tot
        out.append((b_chain, np.minimum(1.0, 100.0 * p / s.q), "f_b"))
        # quantifier chain
        p0 = float(proportion(self.scan, s.f_d, s.f_b))
        out.append((qs, np.minimum(1.0, 100.0 * p0 / qs), "q"))
        return out

    def apply(self, prop, general: bool, rng):
        """Run each candidate move to completion and pick one by the μ-based law."""
        if isinstance(prop, VelocityProposition):
            chain = (coarser_chain(prop.f_v) if general
                     else finer_chain(prop.f_v, self.p.cfg.max_granularity))
            mus = _chain_membership(chain, [self.vel])[:, 0]
            k = _first_or_extreme(mus, self._goal(mus, general, strict=True), general)
            return VelocityProposition(chain[k])
        results = []
        for states, mus, field_name in self._sector_moves(prop, general):
            k = _first_or_extreme(mus, self._goal(mus, general, strict=False), general)
            state = float(states[k]) if field_name == "q" else states[k]
            results.append((replace(prop, **{field_name: state}), float(mus[k])))
        mus = np.array([m for _, m in results])
        if general:
            k = _pick(rng, mus)
        else:
            zero = mus <= 0
            k = _pick(rng, zero.astype(float)) if zero.any() else _pick(rng, 1.0 / mus)
        return results[k][0]


def _replace_prop(rule: QFRule, k: int, new) -> QFRule:
    """Replace the k-th proposition (sectors first, then velocity)."""
    if k == len(rule.sectors):
        return replace(rule, velocity=new)
    return replace(rule, sectors=rule.sectors[:k] + (new,) + rule.sectors[k + 1:])


def generalize(ind: Individual, problem: Problem, uncovered: np.ndarray, population, rng):
    """Returns (rule, e_sel) or (rule, None) when no example is available."""
    dof = problem.rule_dof(ind.rule)[uncovered]
    cand = uncovered[dof < problem.cfg.DOF_min]
    if len(cand) == 0:
        return ind.rule, None
    e_sel = int(cand[_pick(rng, problem.generalize_weights(ind, cand, population))])
    moves = _Moves(problem, e_sel)
    rule = ind.rule
    for k, prop in enumerate(ind.rule.propositions):
        if moves.mu(prop) < problem.cfg.DOF_min:
            rule = _replace_prop(rule, k, moves.apply(prop, True, rng))
    return rule, e_sel


def specialize(ind: Individual, problem: Problem, uncovered: np.ndarray, rng):
    """Returns (rule, e_sel, pool) with e_sel None when nothing is covered."""
    pool = problem.specialize_pool(ind.rule, uncovered)
    if len(pool) == 0:
        return ind.rule, None, pool
    e_sel = int(pool[_pick(rng, problem.specialize_weights(ind, pool))])
    moves = _Moves(problem, e_sel)
    props = ind.rule.propositions
    k = int(rng.integers(len(props)))
    return _replace_prop(ind.rule, k, moves.apply(props[k], False, rng)), e_sel, pool


def mutate(ind: Individual, problem: Problem, uncovered: np.ndarray, rng,
           population=()) -> QFRule:
    if rng.random() < min(1.0, max(0.0, ind.confidence)):
        rule, e_sel = generalize(ind, problem, uncovered, population, rng)
        target = e_sel
    else:
        rule, e_sel, pool = specialize(ind, problem, uncovered, rng)
        target = int(pool[int(rng.integers(len(pool)))]) if len(pool) else None
    if target is not None:
        rule = replace(rule, consequent=problem.mutate_consequent(rule, target, rng))
    return rule


# ---------------------------------------------------------------- epoch loop

def _rank(pop: list) -> list:
    return sorted(pop, key=lambda ind: -ind.fitness)


def _force_cover(problem: Problem, best: Individual, uncovered: np.ndarray, seed: int) -> tuple:
    dof = problem.rule_dof(best.rule)[uncovered]
    if dof.max() > 0:
        return (int(uncovered[int(np.argmax(dof))]),)
    return (seed,) if seed in set(uncovered.tolist()) else (int(uncovered[0]),)


def epoch(state: EpochState, problem: Problem, rng,
          on_iteration: Optional[Callable] = None) -> EpochState:
    cfg = problem.cfg
    uncovered = state.uncovered
    if len(uncovered) == 0:
        raise ValueError("epoch needs uncovered examples")
    if len(uncovered) > cfg.pop_max:
        seeds = np.sort(rng.choice(uncovered, size=cfg.pop_max, replace=False))
    else:
        seeds = uncovered
    pop = _rank([problem.evaluate(problem.init_rule(int(i)), uncovered) for i in seeds])
    seed_of_best = {pop[0].rule: int(seeds[0])}
    for ind, s in zip(pop, seeds):
        seed_of_best.setdefault(ind.rule, int(s))
    best, it, equal = pop[0], 0, 0
    while True:
        offspring = []
        for a, b in mate_pairs(pop, problem, rng, cfg.pairs):
            if rng.random() < cfg.P_cross:
                kids = crossover(pop[a], pop[b], problem.variables, rng)
            else:
                kids = (mutate(pop[a], problem, uncovered, rng, pop),
                        mutate(pop[b], problem, uncovered, rng, pop))
            offspring.extend(problem.evaluate(k, uncovered) for k in kids)
        pop = _rank(pop + offspring)[:cfg.pop_max]
        if pop[0].rule == best.rule:
            equal += 1
        else:
            equal = 0
        best = pop[0]
        it += 1
        if on_iteration is not None:
            on_iteration(it, best)
        if (it >= cfg.it_min and equal >= cfg.it_check) or it >= cfg.it_max:
            break
    covered = best.covered or _force_cover(problem, best, uncovered,
                                           seed_of_best.get(best.rule, int(seeds[0])))
    kb = state.kb
    kb = replace(kb, rules=kb.rules + (best.rule,), fitness=kb.fitness + (best.fitness,))
    remaining = np.setdiff1d(uncovered, np.asarray(covered, dtype=int))
    return EpochState(remaining, kb, pop, it, equal)


def empty_kb(problem: Problem) -> KnowledgeBase:
    return KnowledgeBase((), problem.variables, ())


def run_epochs(problem: Problem, rng, on_epoch: Optional[Callable] = None,
               max_epochs: Optional[int] = None, uncovered=None) -> KnowledgeBase:
    if uncovered is None:
        uncovered = np.arange(len(problem.data))
    state = EpochState(np.asarray(uncovered, dtype=int), empty_kb(problem))
    n = 0
    while len(state.uncovered):
        before = len(state.uncovered)
        state = epoch(state, problem, rng)
        n += 1
        assert len(state.uncovered) < before
        if on_epoch is not None:
            on_epoch(n, state.kb.fitness[-1], len(state.uncovered))
        if max_epochs is not None and n >= max_epochs:
            break
    return state.kb


def train(dataset: Dataset, cfg: LearnerConfig = LearnerConfig(), rng=None,
          on_epoch: Optional[Callable] = None) -> KnowledgeBase:
    """Learn a regression knowledge base. ``rng`` defaults to ``cfg.rng_seed``."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if dataset.is_classification:
        raise ValueError("use train_classifier for class datasets")
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    return run_epochs(Problem(dataset, cfg), rng, on_epoch)


def match_rate(kb: KnowledgeBase, dataset: Dataset, cfg: LearnerConfig = LearnerConfig()) -> float:
    """Share of examples matched by some rule with P > P_min and DOF > DOF_min."""
    problem = Problem(dataset, cfg)
    idx = np.arange(len(dataset))
    ok = np.zeros(len(dataset), dtype=bool)
    for r in kb.rules:
        ok |= problem.accurate(r, idx)
    return float(ok.mean()) if len(ok) else 1.0


def evaluate(rule: QFRule, dataset: Dataset, uncovered=None,
             cfg: LearnerConfig = LearnerConfig()) -> Individual:
    problem = Problem(dataset, cfg)
    idx = np.arange(len(dataset)) if uncovered is None else np.asarray(uncovered, dtype=int)
    return problem.evaluate(rule, idx)


def init_individual(dataset: Dataset, i: int, cfg: LearnerConfig = LearnerConfig()) -> QFRule:
    return Problem(dataset, cfg).init_rule(i)
