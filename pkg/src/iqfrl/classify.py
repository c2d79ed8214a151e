"""Classification variant: class consequents, tp/fp/fn fitness, situation classifier metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import Dataset
from .learn import Individual, LearnerConfig, Problem, run_epochs
from .rules import ClassConsequent, KnowledgeBase, QFRule


@dataclass(frozen=True)
class ClassFitnessStats:
    tp_count: int
    fp_count: int
    fn_count: int
    tpd: float
    fpd: float
    tp: float
    fp: float
    confidence: float
    support: float
    fitness: float


def class_fitness(dof: np.ndarray, classes: np.ndarray, class_id: int,
                  pool: np.ndarray | None = None) -> ClassFitnessStats:
    """tp/fn are counted over ``pool`` (default: all examples), fp over all examples."""
    pool = np.arange(len(dof)) if pool is None else pool
    own = classes[pool] == class_id
    fired = dof[pool] > 0
    tp_mask = own & fired
    tp_count = int(tp_mask.sum())
    tpd = float(dof[pool][tp_mask].sum())
    tp = tp_count + tpd / tp_count if tp_count else 0.0
    fp_mask = (classes != class_id) & (dof > 0)
    fp_count = int(fp_mask.sum())
    fpd = float(dof[fp_mask].sum())
    fp = fp_count + fpd / fp_count if fp_count else 0.0
    fn_count = int(own.sum()) - tp_count
    confidence = 10.0 ** (-fp)
    support = tp / (tp + fn_count) if tp > 0 else 0.0
    return ClassFitnessStats(tp_count, fp_count, fn_count, tpd, fpd, tp, fp,
                             confidence, support, confidence * support)


class ClassProblem(Problem):
    kind = "class"

    def __init__(self, data: Dataset, cfg: LearnerConfig):
        if not data.is_classification:
            raise ValueError("class dataset required")
        super().__init__(data, cfg)
        self.classes = data.classes
        self.class_ids = np.arange(1, max(data.n_classes, int(data.classes.max(initial=1))) + 1)

    def match(self, c) -> np.ndarray:
        hit = self._match_cache.get(c)
        if hit is None:
            hit = (self.classes == c.class_id).astype(float)
            hit.setflags(write=False)
            self._match_cache[c] = hit
        return hit

    def accurate(self, rule: QFRule, idx: np.ndarray) -> np.ndarray:
        return (self.classes[idx] == rule.consequent.class_id) & \
               (self.rule_dof(rule)[idx] > self.cfg.DOF_min)

    def stats(self, rule: QFRule, uncovered: np.ndarray) -> ClassFitnessStats:
        return class_fitness(self.rule_dof(rule), self.classes, rule.consequent.class_id, uncovered)

    def evaluate(self, rule: QFRule, uncovered: np.ndarray) -> Individual:
        st = self.stats(rule, uncovered)
        ok = self.accurate(rule, uncovered)
        return Individual(rule, st.fitness, st.confidence, st.support,
                          tuple(int(i) for i in uncovered[ok]))

    def init_consequent(self, i: int):
        return ClassConsequent(int(self.classes[i]))

    def generalize_weights(self, ind: Individual, cand: np.ndarray, population) -> np.ndarray:
        return generalize_selection_weights(
            np.array([self.rule_dof(p.rule)[cand] for p in population]).reshape(-1, len(cand)),
            np.array([p.confidence for p in population]))

    def specialize_weights(self, ind: Individual, cand: np.ndarray) -> np.ndarray:
        return 1.0 - self.rule_dof(ind.rule)[cand]

    def specialize_pool(self, rule: QFRule, uncovered: np.ndarray) -> np.ndarray:
        # false positives live outside the uncovered set too
        return np.flatnonzero(self.rule_dof(rule) > self.cfg.DOF_min)

    def mutate_consequent(self, rule: QFRule, e_idx: int, rng):
        p = class_flip_probabilities(self.rule_dof(rule), self.classes, self.class_ids)
        return ClassConsequent(int(rng.choice(self.class_ids, p=p)))

    def closeness(self, c, others) -> np.ndarray:
        return np.array([1.0 if o.class_id == c.class_id else 0.0 for o in others])


def generalize_selection_weights(dofs: np.ndarray, confidences: np.ndarray) -> np.ndarray:
    """1 - sum_j DOF_j(e) conf_j / sum_j DOF_j(e); 1 where no individual fires."""
    tot = dofs.sum(axis=0)
    num = (dofs * confidences[:, None]).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(tot > 0, 1.0 - num / tot, 1.0)
    return np.clip(w, 0.0, 1.0)


def class_flip_probabilities(dof: np.ndarray, classes: np.ndarray, class_ids) -> np.ndarray:
    """P(class gamma) = DOF mass on gamma's examples over total DOF; uniform if none fire."""
    class_ids = np.asarray(class_ids)
    mass = np.array([dof[classes == c].sum() for c in class_ids], dtype=float)
    tot = mass.sum()
    if not tot > 0:
        return np.full(len(class_ids), 1.0 / len(class_ids))
    return mass / tot


def train_classifier(dataset: Dataset, cfg: LearnerConfig = LearnerConfig(), rng=None,
                     on_epoch: Optional[Callable] = None) -> KnowledgeBase:
    """Learn rules for every non-default class; the default class needs no rules."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(cfg.rng_seed) if rng is None else rng
    problem = ClassProblem(dataset, cfg)
    seeds = np.flatnonzero(dataset.classes != dataset.default_class)
    kb = run_epochs(problem, rng, on_epoch, uncovered=seeds)
    n_classes = max(dataset.n_classes, int(dataset.classes.max(initial=1)))
    return KnowledgeBase(kb.rules, kb.variables, kb.fitness, n_classes, dataset.default_class)


def classify(kb: KnowledgeBase, distances, velocity):
    """Class of the max-DOF rule (earliest on ties); default class if nothing fires.

    Batched when ``distances`` is 2-D.
    """
    batched = np.ndim(distances) == 2
    dofs = kb.dof_matrix(distances, velocity)
    if len(kb.rules) == 0:
        out = np.full(dofs.shape[1], kb.default_class)
    else:
        best = np.argmax(dofs, axis=0)
        fired = dofs.max(axis=0) > 0
        cls = np.array([r.consequent.class_id for r in kb.rules])
        out = np.where(fired, cls[best], kb.default_class)
    return out if batched else int(out[0])


def confusion_matrix(actual, predicted, n_classes: int) -> np.ndarray:
    """Rows are actual classes, columns predicted (1-based ids)."""
    m = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(m, (np.asarray(actual) - 1, np.asarray(predicted) - 1), 1)
    return m


def accuracy_and_kappa(matrix) -> tuple[float, float]:
    """Accuracy and Cohen's kappa of a confusion matrix (kappa is nan if undefined)."""
    m = np.asarray(matrix, dtype=float)
    total = m.sum()
    p_o = np.trace(m) / total
    p_e = float((m.sum(axis=0) * m.sum(axis=1)).sum() / total ** 2)
    if p_e >= 1.0:
        return float(p_o), float("nan")
    return float(p_o), float((p_o - p_e) / (1.0 - p_e))


def confusion_and_kappa(kb: KnowledgeBase, dataset: Dataset):
    pred = classify(kb, dataset.distances, dataset.velocity)
    n = max(kb.n_classes, dataset.n_classes, int(dataset.classes.max(initial=1)))
    m = confusion_matrix(dataset.classes, pred, n)
    acc, kappa = accuracy_and_kappa(m)
    return m, acc, kappa
