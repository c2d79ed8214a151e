"""Rule genotypes, knowledge bases and the ``.qfr`` text format.

A rule follows the controller grammar::

    rule       -> antecedent consequent
    antecedent -> sector F_v | sector
    consequent -> F_lv F_av          (classification: F_c)
    sector     -> F_d Q F_b sector | F_d Q F_b
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional, Union

import numpy as np

from .fuzzy import (EmptySectorError, Label, _label_mu, beam_weights, Universe, infer_weighted, proportion, quantifier_degree,
                    sector_is_empty)

Q_MIN, Q_MAX = 10.0, 100.0


@dataclass(frozen=True)
class Variables:
    """Universes of the inputs and the output partitions."""

    n_beams: int = 722
    distance: Universe = Universe("d", 0.0, 1.5)
    velocity: Universe = Universe("v", 0.0, 0.5)
    vlin: Universe = Universe("vlin", 0.0, 0.5)
    vang: Universe = Universe("vang", -math.pi / 4, math.pi / 4)
    vlin_granularity: int = 9
    vang_granularity: int = 19

    @property
    def beam(self) -> Universe:
        return Universe("b", 0.0, float(self.n_beams - 1))

    def output_center(self, which: str, index: int) -> float:
        return _output_center(self, which, index)


@lru_cache(maxsize=4096)
def _output_center(v: Variables, which: str, index: int) -> float:
    u = v.vlin if which == "vlin" else v.vang
    g = v.vlin_granularity if which == "vlin" else v.vang_granularity
    return Label(u, g, index).center


@dataclass(frozen=True)
class SectorProposition:
    """``d(h) is f_d in q percent of f_b``."""

    f_d: Label
    f_b: Label
    q: float

    def degree(self, distances):
        return quantifier_degree(proportion(distances, self.f_d, self.f_b), self.q)

    def __str__(self):
        return f"d(h) is {self.f_d} in {self.q!r} percent of {self.f_b}"


@dataclass(frozen=True)
class VelocityProposition:
    f_v: Label

    def degree(self, velocity):
        return self.f_v.membership(velocity)

    def __str__(self):
        return f"velocity is {self.f_v}"


@dataclass(frozen=True)
class Consequent:
    vlin: int
    vang: int


@dataclass(frozen=True)
class ClassConsequent:
    class_id: int


Proposition = Union[SectorProposition, VelocityProposition]


@dataclass(frozen=True)
class QFRule:
    sectors: tuple[SectorProposition, ...]
    velocity: Optional[VelocityProposition]
    consequent: Union[Consequent, ClassConsequent]

    @property
    def propositions(self) -> tuple[Proposition, ...]:
        return self.sectors + ((self.velocity,) if self.velocity is not None else ())

    def dof(self, distances, velocity):
        """Minimum over the antecedent propositions; vectorized over examples."""
        out = None
        for prop in self.propositions:
            mu = prop.degree(velocity if isinstance(prop, VelocityProposition) else distances)
            out = mu if out is None else np.minimum(out, mu)
        return out


def validate(rule, variables: Variables | None = None, n_classes: int | None = None):
    """Check a rule against the grammar. Returns ``(ok, problems)``."""
    problems = []
    sectors = getattr(rule, "sectors", None)
    if not isinstance(sectors, tuple) or len(sectors) == 0:
        problems.append("antecedent needs at least one sector proposition")
        sectors = sectors or ()
    for k, s in enumerate(sectors):
        if not isinstance(s, SectorProposition):
            problems.append(f"sector {k}: not a sector proposition")
            continue
        if not Q_MIN <= s.q <= Q_MAX:
            problems.append(f"sector {k}: quantifier {s.q} outside [{Q_MIN}, {Q_MAX}]")
        if variables is not None:
            if s.f_d.universe != variables.distance:
                problems.append(f"sector {k}: F_d not on the distance universe")
            if s.f_b.universe != variables.beam:
                problems.append(f"sector {k}: F_b not on the beam universe")
            elif sector_is_empty(s.f_b, variables.n_beams):
                problems.append(f"sector {k}: F_b covers no beam")
    vel = getattr(rule, "velocity", None)
    if vel is not None:
        if not isinstance(vel, VelocityProposition):
            problems.append("velocity: not a velocity proposition")
        elif variables is not None and vel.f_v.universe != variables.velocity:
            problems.append("velocity: F_v not on the velocity universe")
    c = getattr(rule, "consequent", None)
    if isinstance(c, Consequent):
        if variables is not None and not (1 <= c.vlin <= variables.vlin_granularity
                                          and 1 <= c.vang <= variables.vang_granularity):
            problems.append("consequent label index out of range")
    elif isinstance(c, ClassConsequent):
        if c.class_id < 1 or (n_classes is not None and c.class_id > n_classes):
            problems.append(f"class {c.class_id} out of range")
    else:
        problems.append("missing consequent")
    return not problems, problems


@dataclass(frozen=True)
class KnowledgeBase:
    rules: tuple[QFRule, ...] = ()
    variables: Variables = field(default_factory=Variables)
    fitness: tuple[float, ...] = ()
    n_classes: int = 0
    default_class: int = 1

    @property
    def is_classifier(self) -> bool:
        return self.n_classes > 0

    def __len__(self):
        return len(self.rules)

    def subset(self, keep) -> KnowledgeBase:
        keep = [bool(k) for k in keep]
        rules = tuple(r for r, k in zip(self.rules, keep) if k)
        fit = tuple(f for f, k in zip(self.fitness, keep) if k) if self.fitness else ()
        return KnowledgeBase(rules, self.variables, fit, self.n_classes, self.default_class)

    def dof_matrix(self, distances, velocity) -> np.ndarray:
        """(n_rules, n_examples) degrees of fulfillment."""
        distances = np.atleast_2d(np.asarray(distances, dtype=float))
        velocity = np.atleast_1d(np.asarray(velocity, dtype=float))
        if not self.rules:
            return np.zeros((0, len(velocity)))
        if self._compiled is None:
            return np.vstack([r.dof(distances, velocity) for r in self.rules])
        return self._compiled(distances, velocity)

    @cached_property
    def _compiled(self):
        if any(not r.sectors for r in self.rules):
            return None
        return _CompiledRules(self.rules, self.variables)

    def output_centers(self) -> np.ndarray:
        v = self.variables
        return np.array([[v.output_center("vlin", r.consequent.vlin),
                          v.output_center("vang", r.consequent.vang)] for r in self.rules]
                        ).reshape(len(self.rules), 2)


class _CompiledRules:
    """All sector propositions of a rule list flattened into one array pass."""

    _CHUNK = 1 << 22  # elements per example block

    def __init__(self, rules, variables: Variables):
        n = variables.n_beams
        self.distance, self.velocity = variables.distance, variables.velocity
        beams, weights, starts, totals = [], [], [], []
        c, hw, full, q, rule_starts = [], [], [], [], []
        vel_rule, vel_geom = [], []
        for r_i, rule in enumerate(rules):
            rule_starts.append(len(q))
            for s in rule.sectors:
                w = beam_weights(s.f_b, n)
                idx = np.flatnonzero(w)
                if not w[idx].sum() > 0:
                    raise EmptySectorError(f"{s.f_b} covers no beam of a {n}-beam scan")
                starts.append(len(beams))
                beams.extend(idx)
                weights.extend(w[idx])
                totals.append(w[idx].sum())
                c.extend([s.f_d.center] * len(idx))
                hw.extend([s.f_d.half_width] * len(idx))
                full.extend([s.f_d.granularity == 1] * len(idx))
                q.append(s.q)
            if rule.velocity is not None:
                f = rule.velocity.f_v
                vel_rule.append(r_i)
                vel_geom.append((f.center, f.half_width, f.granularity == 1))
        self.beams = np.array(beams, dtype=int)
        self.weights = np.array(weights)
        self.starts = np.array(starts, dtype=int)
        self.totals = np.array(totals)
        self.c, self.hw, self.full = np.array(c), np.array(hw), np.array(full)
        self.q = np.array(q)
        self.rule_starts = np.array(rule_starts, dtype=int)
        self.vel_rule = np.array(vel_rule, dtype=int)
        self.vel_geom = np.array(vel_geom, dtype=float).reshape(-1, 3)

    def __call__(self, distances, velocity) -> np.ndarray:
        d = self.distance.clamp(distances)
        block = max(1, self._CHUNK // max(1, len(self.beams)))
        out = []
        for k in range(0, len(d), block):
            x = d[k:k + block][:, self.beams]
            mu = np.minimum(_label_mu(x, self.c, self.hw, self.full), self.weights)
            p = np.add.reduceat(mu, self.starts, axis=1) / self.totals
            deg = np.minimum(1.0, 100.0 * p / self.q)
            out.append(np.minimum.reduceat(deg, self.rule_starts, axis=1).T)
        dof = np.hstack(out)
        if len(self.vel_rule):
            v = self.velocity.clamp(velocity)[None, :]
            g = self.vel_geom
            mu_v = _label_mu(v, g[:, :1], g[:, 1:2], g[:, 2:3].astype(bool))
            dof[self.vel_rule] = np.minimum(dof[self.vel_rule], mu_v)
        return dof


# ---------------------------------------------------------------- text format

_FLOAT = r"[-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|inf|nan)"
_LABEL = r"A_(\w+)\^\{(\d+),(\d+)\}"
_SECTOR_RE = re.compile(rf"d\(h\) is {_LABEL} in ({_FLOAT}) percent of {_LABEL}$")
_VEL_RE = re.compile(rf"velocity is {_LABEL}$")
_OUT_RE = re.compile(r"vlin is A_vlin\^\{(\d+)\} and vang is A_vang\^\{(\d+)\}$")
_CLASS_RE = re.compile(r"class is A_c\^\{(\d+)\}$")


class QFRParseError(ValueError):
    def __init__(self, line: int, column: int, token: str, message: str):
        super().__init__(f"line {line}, column {column}: {message} (at {token!r})")
        self.line, self.column, self.token = line, column, token


def serialize_kb(kb: KnowledgeBase) -> str:
    v = kb.variables
    out = ["# qfr 1",
           f"beams {v.n_beams}",
           f"universe d {v.distance.lo!r} {v.distance.hi!r}",
           f"universe v {v.velocity.lo!r} {v.velocity.hi!r}",
           f"output vlin {v.vlin.lo!r} {v.vlin.hi!r} {v.vlin_granularity}",
           f"output vang {v.vang.lo!r} {v.vang.hi!r} {v.vang_granularity}"]
    if kb.is_classifier:
        out.append(f"classes {kb.n_classes} default {kb.default_class}")
    out.append(f"rules {len(kb.rules)}")
    for k, rule in enumerate(kb.rules):
        out.append("")
        head = f"rule {k + 1}"
        if kb.fitness:
            head += f" fitness {kb.fitness[k]!r}"
        out.append(head)
        out.append("IF")
        for s in rule.sectors:
            out.append(f"  {s}")
        if rule.velocity is not None:
            out.append(f"  {rule.velocity}")
        out.append("THEN")
        c = rule.consequent
        if isinstance(c, ClassConsequent):
            out.append(f"  class is A_c^{{{c.class_id}}}")
        else:
            out.append(f"  vlin is A_vlin^{{{c.vlin}}} and vang is A_vang^{{{c.vang}}}")
        out.append("END")
    return "\n".join(out) + "\n"


def parse_kb(text: str) -> KnowledgeBase:
    lines = text.splitlines()
    pos = 0

    def err(msg, lineno=None, col=1, token=""):
        lineno = pos if lineno is None else lineno
        src = lines[lineno - 1] if 0 < lineno <= len(lines) else ""
        raise QFRParseError(lineno, col, token or src.strip()[:40], msg)

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            raw = lines[pos - 1]
            s = raw.strip()
            if s and not s.startswith("#"):
                return s, len(raw) - len(raw.lstrip()) + 1
        return None, 0

    def num(tok, col, cast=float):
        try:
            return cast(tok)
        except ValueError:
            err(f"expected {cast.__name__}", col=col, token=tok)

    header = {}
    n_rules = None
    classes = (0, 1)
    while n_rules is None:
        s, col = next_line()
        if s is None:
            err("missing 'rules' header line", lineno=len(lines))
        toks = s.split()
        key = toks[0]
        if key == "beams" and len(toks) == 2:
            header["n_beams"] = num(toks[1], col, int)
        elif key == "universe" and len(toks) == 4 and toks[1] in ("d", "v"):
            name = "distance" if toks[1] == "d" else "velocity"
            header[name] = Universe(toks[1], num(toks[2], col), num(toks[3], col))
        elif key == "output" and len(toks) == 5 and toks[1] in ("vlin", "vang"):
            header[toks[1]] = Universe(toks[1], num(toks[2], col), num(toks[3], col))
            header[f"{toks[1]}_granularity"] = num(toks[4], col, int)
        elif key == "classes" and len(toks) == 4 and toks[2] == "default":
            classes = (num(toks[1], col, int), num(toks[3], col, int))
        elif key == "rules" and len(toks) == 2:
            n_rules = num(toks[1], col, int)
        else:
            err("unknown header line", col=col, token=toks[0])
    variables = Variables(**header)
    universes = {"d": variables.distance, "b": variables.beam, "v": variables.velocity}

    def label(m, off, line_no, col):
        name, g, j = m.group(off), int(m.group(off + 1)), int(m.group(off + 2))
        if name not in universes:
            err(f"unknown universe {name!r}", line_no, col + m.start(off), name)
        try:
            return Label(universes[name], g, j)
        except ValueError as e:
            err(str(e), line_no, col + m.start(off), m.group(0))

    rules, fitness = [], []
    for k in range(n_rules):
        s, col = next_line()
        if s is None:
            err(f"expected rule {k + 1}, found end of input", lineno=len(lines))
        toks = s.split()
        if toks[:2] != ["rule", str(k + 1)]:
            err(f"expected 'rule {k + 1}'", col=col, token=toks[0])
        if len(toks) == 4 and toks[2] == "fitness":
            fitness.append(num(toks[3], col))
        elif len(toks) != 2:
            err("unexpected tokens after rule number", col=col, token=" ".join(toks[2:]))
        s, col = next_line()
        if s != "IF":
            err("expected 'IF'", col=col, token=s or "")
        sectors, velocity, consequent = [], None, None
        while True:
            s, col = next_line()
            if s is None:
                err("unterminated rule", lineno=len(lines))
            if s == "THEN":
                break
            m = _SECTOR_RE.match(s)
            if m:
                q = num(m.group(4), col + m.start(4))
                sectors.append(SectorProposition(label(m, 1, pos, col), label(m, 5, pos, col), q))
                continue
            m = _VEL_RE.match(s)
            if m and velocity is None:
                velocity = VelocityProposition(label(m, 1, pos, col))
                continue
            err("expected a sector or velocity proposition", col=col, token=s.split()[0])
        s, col = next_line()
        m = _OUT_RE.match(s or "")
        if m:
            consequent = Consequent(int(m.group(1)), int(m.group(2)))
        else:
            m = _CLASS_RE.match(s or "")
            if not m:
                err("expected a consequent", col=col, token=(s or "").split()[0] if s else "")
            consequent = ClassConsequent(int(m.group(1)))
        s, col = next_line()
        if s != "END":
            err("expected 'END'", col=col, token=s or "")
        rule = QFRule(tuple(sectors), velocity, consequent)
        ok, problems = validate(rule, variables, classes[0] or None)
        if not ok:
            err("; ".join(problems), lineno=pos)
        rules.append(rule)
    s, col = next_line()
    if s is not None:
        err("trailing content after last rule", col=col, token=s.split()[0])
    if fitness and len(fitness) != len(rules):
        err("fitness given for some rules only", lineno=len(lines))
    return KnowledgeBase(tuple(rules), variables, tuple(fitness), classes[0], classes[1])


def load_kb(path) -> KnowledgeBase:
    with open(path) as fh:
        return parse_kb(fh.read())


def save_kb(kb: KnowledgeBase, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_kb(kb))


def qfp_dof(prop: SectorProposition, scan):
    return prop.degree(np.asarray(scan, dtype=float))


def rule_dof(rule: QFRule, distances, velocity) -> float:
    return float(np.asarray(rule.dof(np.asarray(distances, dtype=float), float(velocity))).reshape(-1)[0])


def infer(kb: KnowledgeBase, distances, velocity):
    """Weighted-average (vlin, vang). Raises UncoveredInputError when no rule fires.

    Batched when ``distances`` is 2-D; then returns two arrays.
    """
    batched = np.ndim(distances) == 2
    dofs = kb.dof_matrix(distances, velocity)
    out = infer_weighted(dofs, kb.output_centers())
    return (out[0], out[1]) if batched else (float(out[0][0]), float(out[1][0]))
