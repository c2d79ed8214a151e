import numpy as np
import pytest

import oracles
from iqfrl.classify import (accuracy_and_kappa, class_fitness, class_flip_probabilities, classify,
                            confusion_and_kappa, confusion_matrix, generalize_selection_weights,
                            train_classifier)
from iqfrl.data import CC, CX, SW, Dataset
from iqfrl.fuzzy import Label
from iqfrl.learn import LearnerConfig
from iqfrl.rules import ClassConsequent, KnowledgeBase, QFRule, SectorProposition, Variables

V4 = Variables(n_beams=4)

REPORTED_CONFUSION = [[30.85, 2.40, 0.23], [0.70, 30.97, 0.00], [0.23, 0.06, 34.55]]


def class_rule(jd, cls, gd=5, q=100.0):
    return QFRule((SectorProposition(Label(V4.distance, gd, jd), Label(V4.beam, 1, 1), q),), None,
                  ClassConsequent(cls))


def test_fitness_no_false_positives():
    st = class_fitness(np.array([1.0, 0.0]), np.array([2, 1]), 2)
    assert st.confidence == 1.0


def test_fitness_one_false_positive():
    st = class_fitness(np.array([1.0, 1.0]), np.array([2, 1]), 2)
    assert (st.fp_count, st.fp) == (1, 2.0)
    assert st.confidence == pytest.approx(1e-2)


def test_fitness_perfect_rule():
    dof = np.array([1.0, 1.0, 1.0, 0.0])
    st = class_fitness(dof, np.array([3, 3, 3, 1]), 3)
    assert st.tp == 4.0 and st.support == 1.0 and st.fitness == 1.0


def test_flip_probabilities():
    dof = np.array([1.0, 2.0, 1.0])
    assert class_flip_probabilities(dof, np.array([1, 1, 2]), [1, 2, 3]) == pytest.approx([0.75, 0.25, 0])
    only_two = class_flip_probabilities(np.array([0.0, 0.4]), np.array([1, 2]), [1, 2, 3])
    assert only_two.tolist() == [0.0, 1.0, 0.0]
    assert class_flip_probabilities(np.zeros(2), np.array([1, 2]), [1, 2]).tolist() == [0.5, 0.5]


def test_generalize_weights_uncovered_example_is_one():
    w = generalize_selection_weights(np.array([[0.0, 0.5], [0.0, 0.5]]), np.array([0.2, 1.0]))
    assert w[0] == 1.0
    assert w[1] == pytest.approx(1 - 0.6)


def test_classify_default_best_and_ties():
    kb = KnowledgeBase((class_rule(1, CX), class_rule(1, CC), class_rule(5, CC)), V4, (), 3, SW)
    assert classify(kb, np.zeros(4), 0.0) == CX  # tie goes to the earlier rule
    assert classify(kb, np.full(4, 1.5), 0.0) == CC
    silent = KnowledgeBase((class_rule(3, CC, gd=5, q=100.0),), V4, (), 3, SW)
    assert classify(silent, np.zeros(4), 0.0) == SW


def test_classify_picks_max_dof():
    kb = KnowledgeBase((class_rule(1, CX, gd=2), class_rule(2, CC, gd=2)), V4, (), 3, SW)
    scan = np.full(4, 1.2)  # A^{2,1} 0.2, A^{2,2} 0.8
    assert classify(kb, scan, 0.0) == CC


def test_perfect_classifier_metrics():
    m = confusion_matrix([1, 2, 3, 3], [1, 2, 3, 3], 3)
    assert accuracy_and_kappa(m) == (1.0, 1.0)


def test_random_predictions_kappa_near_zero():
    rng = np.random.default_rng(0)
    actual = rng.integers(1, 4, 10_000)
    pred = rng.integers(1, 4, 10_000)
    _, kappa = accuracy_and_kappa(confusion_matrix(actual, pred, 3))
    assert abs(kappa) < 0.05


def test_single_class_kappa_undefined():
    acc, kappa = accuracy_and_kappa([[5, 0], [0, 0]])
    assert acc == 1.0 and np.isnan(kappa)


def test_reported_matrix_matches_oracle():
    acc, kappa = accuracy_and_kappa(REPORTED_CONFUSION)
    ref_acc, ref_kappa = oracles.kappa(REPORTED_CONFUSION)
    assert acc == pytest.approx(ref_acc, abs=1e-12)
    assert kappa == pytest.approx(ref_kappa, abs=1e-12)
    assert acc == pytest.approx(0.96, abs=0.005)


def test_train_classifier_separable():
    rng = np.random.default_rng(2)
    near = rng.uniform(0.0, 0.3, (10, 4))
    far = rng.uniform(1.2, 1.5, (10, 4))
    ds = Dataset(np.r_[near, far], np.zeros(20), classes=[CC] * 10 + [SW] * 10, variables=V4,
                 n_classes=3)
    kb = train_classifier(ds, LearnerConfig(pop_max=6, it_min=3, it_check=2, it_max=6))
    assert all(r.consequent.class_id != SW for r in kb.rules)
    m, acc, kappa = confusion_and_kappa(kb, ds)
    assert acc == 1.0 and kappa == 1.0
    assert m.sum() == 20
