"""Examples, datasets and the line-oriented dataset/config file formats.

Dataset file::

    # iqfrl-dataset kind=regression n_beams=16 d=0.0,1.5 v=0.0,0.5 ...
    d(1),...,d(N_b),velocity,vlin,vang

Classification files carry ``kind=class`` and a single integer class field instead
of ``vlin,vang``.
"""
from __future__ import annotations

import dataclasses
import io
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fuzzy import Universe
from .rules import Variables

SW, CX, CC = 1, 2, 3
SITUATIONS = {"SW": SW, "CX": CX, "CC": CC}


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingExample:
    distances: np.ndarray
    velocity: float
    vlin: float = 0.0
    vang: float = 0.0


@dataclass(frozen=True)
class ClassExample:
    distances: np.ndarray
    velocity: float
    class_id: int


@dataclass(frozen=True)
class Dataset:
    """Column-major view of a list of examples (regression or classification)."""

    distances: np.ndarray
    velocity: np.ndarray
    outputs: Optional[np.ndarray] = None
    classes: Optional[np.ndarray] = None
    variables: Variables = Variables()
    n_classes: int = 0
    default_class: int = SW

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float).reshape(-1, self.variables.n_beams)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(-1))
        if self.outputs is not None:
            object.__setattr__(self, "outputs", np.asarray(self.outputs, dtype=float).reshape(-1, 2))
        if self.classes is not None:
            object.__setattr__(self, "classes", np.asarray(self.classes, dtype=int).reshape(-1))
        n = len(d)
        if len(self.velocity) != n:
            raise DataFormatError("velocity column length differs from the scan count")
        if (self.outputs is None) == (self.classes is None):
            raise DataFormatError("a dataset needs either outputs or classes")
        labels = self.outputs if self.outputs is not None else self.classes
        if len(labels) != n:
            raise DataFormatError("label column length differs from the scan count")
        if not (np.isfinite(d).all() and np.isfinite(self.velocity).all()):
            raise DataFormatError("non-finite values in dataset")

    def __len__(self):
        return len(self.distances)

    @property
    def is_classification(self) -> bool:
        return self.classes is not None

    @classmethod
    def from_examples(cls, examples, variables: Variables | None = None, **kw) -> Dataset:
        examples = list(examples)
        if variables is None:
            n_b = len(examples[0].distances) if examples else Variables().n_beams
            variables = Variables(n_beams=n_b)
        d = np.array([e.distances for e in examples], dtype=float).reshape(-1, variables.n_beams)
        v = np.array([e.velocity for e in examples], dtype=float)
        if examples and isinstance(examples[0], ClassExample):
            c = np.array([e.class_id for e in examples], dtype=int)
            kw.setdefault("n_classes", int(c.max()) if len(c) else 0)
            return cls(d, v, classes=c, variables=variables, **kw)
        y = np.array([[e.vlin, e.vang] for e in examples], dtype=float)
        return cls(d, v, outputs=y, variables=variables, **kw)

    def example(self, i: int):
        if self.is_classification:
            return ClassExample(self.distances[i], float(self.velocity[i]), int(self.classes[i]))
        return TrainingExample(self.distances[i], float(self.velocity[i]),
                               float(self.outputs[i, 0]), float(self.outputs[i, 1]))

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=int)
        return dataclasses.replace(
            self, distances=self.distances[idx], velocity=self.velocity[idx],
            outputs=None if self.outputs is None else self.outputs[idx],
            classes=None if self.classes is None else self.classes[idx])


def _pair(u: Universe) -> str:
    return f"{u.lo!r},{u.hi!r}"


def dataset_to_text(ds: Dataset) -> str:
    v = ds.variables
    head = [f"kind={'class' if ds.is_classification else 'regression'}",
            f"n_beams={v.n_beams}", f"d={_pair(v.distance)}", f"v={_pair(v.velocity)}",
            f"vlin={_pair(v.vlin)}", f"vang={_pair(v.vang)}",
            f"g_vlin={v.vlin_granularity}", f"g_vang={v.vang_granularity}"]
    if ds.is_classification:
        head += [f"n_classes={ds.n_classes}", f"default={ds.default_class}"]
    buf = io.StringIO()
    buf.write("# iqfrl-dataset " + " ".join(head) + "\n")
    if len(ds):
        labels = ds.outputs if not ds.is_classification else ds.classes[:, None]
        body = np.hstack([ds.distances, ds.velocity[:, None], labels.astype(float)])
        fmt = ["%.17g"] * (body.shape[1] - (1 if ds.is_classification else 0))
        if ds.is_classification:
            fmt.append("%d")
        np.savetxt(buf, body, fmt=fmt, delimiter=",")
    return buf.getvalue()


def dataset_from_text(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# iqfrl-dataset"):
        raise DataFormatError("line 1: missing '# iqfrl-dataset' header")
    meta = {}
    for tok in lines[0].split()[2:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise DataFormatError(f"line 1: malformed header field {tok!r}")
        meta[key] = val

    def universe(name, key):
        try:
            lo, hi = (float(x) for x in meta[key].split(","))
        except (KeyError, ValueError):
            raise DataFormatError(f"line 1: bad or missing universe {key!r}") from None
        return Universe(name, lo, hi)

    try:
        variables = Variables(
            n_beams=int(meta["n_beams"]), distance=universe("d", "d"),
            velocity=universe("v", "v"), vlin=universe("vlin", "vlin"),
            vang=universe("vang", "vang"), vlin_granularity=int(meta.get("g_vlin", 9)),
            vang_granularity=int(meta.get("g_vang", 19)))
        kind = meta["kind"]
    except (KeyError, ValueError) as e:
        raise DataFormatError(f"line 1: bad header ({e})") from None
    is_class = kind == "class"
    if kind not in ("class", "regression"):
        raise DataFormatError(f"line 1: unknown kind {kind!r}")
    width = variables.n_beams + 1 + (1 if is_class else 2)
    rows = [ln for ln in lines[1:] if ln.strip()]
    body = np.zeros((0, width))
    if rows:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for k, ln in enumerate(lines[1:], start=2):
                if ln.strip() and ln.count(",") != width - 1:
                    raise DataFormatError(f"line {k}: expected {width} fields, "
                                          f"found {ln.count(',') + 1}")
            try:
                body = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",", ndmin=2)
            except ValueError as e:
                raise DataFormatError(f"unparseable record: {e}") from None
    nb = variables.n_beams
    d, vel = body[:, :nb], body[:, nb]
    if is_class:
        cls = body[:, nb + 1]
        if not np.all(cls == np.round(cls)):
            raise DataFormatError("class field must be an integer")
        return Dataset(d, vel, classes=cls.astype(int), variables=variables,
                       n_classes=int(meta.get("n_classes", 3)),
                       default_class=int(meta.get("default", SW)))
    return Dataset(d, vel, outputs=body[:, nb + 1:], variables=variables)


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(dataset_to_text(ds))


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        return dataset_from_text(fh.read())


# ---------------------------------------------------------------- config files

def parse_config(text: str, cls):
    """``key = value`` lines (``#`` comments) into the dataclass ``cls``."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    values = {}
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep:
            raise DataFormatError(f"config line {k}: expected 'key = value'")
        if key not in fields:
            raise DataFormatError(f"config line {k}: unknown key {key!r}")
        kind = type(getattr(defaults, key))
        try:
            if kind is bool:
                values[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                values[key] = kind(val)
        except ValueError:
            raise DataFormatError(f"config line {k}: bad value {val!r} for {key}") from None
    return cls(**values)


def config_to_text(cfg) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)!r}\n" for f in dataclasses.fields(cfg))


def load_config(path, cls):
    with open(path) as fh:
        return parse_config(fh.read(), cls)
